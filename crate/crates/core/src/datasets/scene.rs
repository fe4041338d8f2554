//! Procedural clean scenes.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImagePatch;
use crate::rng::rng_from_seed;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    /// Rectangles and discs of constant intensity over a constant background.
    PiecewiseConstantShapes,
    SmoothGradient,
    SinusoidTexture,
}

impl SceneKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SceneKind::PiecewiseConstantShapes => "piecewise_constant_shapes",
            SceneKind::SmoothGradient => "smooth_gradient",
            SceneKind::SinusoidTexture => "sinusoid_texture",
        }
    }
}

impl std::str::FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "piecewise_constant_shapes" => Ok(SceneKind::PiecewiseConstantShapes),
            "smooth_gradient" => Ok(SceneKind::SmoothGradient),
            "sinusoid_texture" => Ok(SceneKind::SinusoidTexture),
            other => Err(Error::InvalidArgument(format!("unknown scene kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub kind: SceneKind,
    /// Side length of the square scene.
    pub size: usize,
    pub min_shapes: usize,
    pub max_shapes: usize,
    pub intensity_lo: f64,
    pub intensity_hi: f64,
    pub seed: u64,
}

impl SceneSpec {
    pub fn new(kind: SceneKind, size: usize, seed: u64) -> Self {
        Self {
            kind,
            size,
            min_shapes: 2,
            max_shapes: 6,
            intensity_lo: 0.1,
            intensity_hi: 0.9,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::InvalidArgument("scene size must be positive".into()));
        }
        if self.min_shapes > self.max_shapes {
            return Err(Error::InvalidArgument(format!(
                "min_shapes {} exceeds max_shapes {}",
                self.min_shapes, self.max_shapes
            )));
        }
        let ok = |v: f64| (0.0..=1.0).contains(&v);
        if !ok(self.intensity_lo) || !ok(self.intensity_hi) || self.intensity_lo > self.intensity_hi {
            return Err(Error::InvalidArgument(format!(
                "intensity range [{}, {}] must lie in [0, 1] and be ordered",
                self.intensity_lo, self.intensity_hi
            )));
        }
        Ok(())
    }
}

pub fn generate_scene<T: Scalar>(spec: &SceneSpec) -> Result<ImagePatch<T>> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let n = spec.size;
    let (lo, hi) = (spec.intensity_lo, spec.intensity_hi);
    let level = |rng: &mut crate::rng::Rng| lo + (hi - lo) * rng.random::<f64>();
    let pixels: Vec<f64> = match spec.kind {
        SceneKind::PiecewiseConstantShapes => {
            let mut img = vec![level(&mut rng); n * n];
            let count = rng.random_range(spec.min_shapes..=spec.max_shapes);
            for _ in 0..count {
                let v = level(&mut rng);
                let side = |rng: &mut crate::rng::Rng| rng.random_range(n.div_ceil(6).max(1)..=n.div_ceil(2).max(1));
                if rng.random_bool(0.5) {
                    let (h, w) = (side(&mut rng), side(&mut rng));
                    let top = rng.random_range(0..=n - h.min(n));
                    let left = rng.random_range(0..=n - w.min(n));
                    for r in top..(top + h).min(n) {
                        for c in left..(left + w).min(n) {
                            img[r * n + c] = v;
                        }
                    }
                } else {
                    let radius = side(&mut rng) as f64 / 2.0;
                    let cy = rng.random::<f64>() * n as f64;
                    let cx = rng.random::<f64>() * n as f64;
                    for r in 0..n {
                        for c in 0..n {
                            let dy = r as f64 + 0.5 - cy;
                            let dx = c as f64 + 0.5 - cx;
                            if dy * dy + dx * dx <= radius * radius {
                                img[r * n + c] = v;
                            }
                        }
                    }
                }
            }
            img
        }
        SceneKind::SmoothGradient => {
            let a = level(&mut rng);
            let b = level(&mut rng);
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let (s, c) = theta.sin_cos();
            let half = (n as f64 - 1.0).max(1.0) / 2.0;
            let reach = half * (s.abs() + c.abs());
            (0..n * n)
                .map(|k| {
                    let (r, col) = ((k / n) as f64 - half, (k % n) as f64 - half);
                    let t = if reach > 0.0 { 0.5 + 0.5 * (c * col + s * r) / reach } else { 0.5 };
                    a + (b - a) * t
                })
                .collect()
        }
        SceneKind::SinusoidTexture => {
            let waves = rng.random_range(spec.min_shapes.max(1)..=spec.max_shapes.max(1));
            let params: Vec<(f64, f64, f64)> = (0..waves)
                .map(|_| {
                    let period = rng.random_range(3.0..(n as f64).max(4.0));
                    let theta = rng.random::<f64>() * std::f64::consts::TAU;
                    (period, theta, rng.random::<f64>() * std::f64::consts::TAU)
                })
                .collect();
            let mid = 0.5 * (lo + hi);
            let amp = 0.5 * (hi - lo) / waves as f64;
            (0..n * n)
                .map(|k| {
                    let (r, c) = ((k / n) as f64, (k % n) as f64);
                    mid + params
                        .iter()
                        .map(|&(p, t, ph)| {
                            amp * ((c * t.cos() + r * t.sin()) * std::f64::consts::TAU / p + ph).sin()
                        })
                        .sum::<f64>()
                })
                .collect()
        }
    };
    ImagePatch::new(n, n, pixels.into_iter().map(T::lit).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_shapes_is_constant() {
        let spec = SceneSpec {
            min_shapes: 0,
            max_shapes: 0,
            ..SceneSpec::new(SceneKind::PiecewiseConstantShapes, 16, 3)
        };
        let img: ImagePatch<f64> = generate_scene(&spec).unwrap();
        assert!(img.pixels().iter().all(|&v| v == img.pixels()[0]));
    }

    #[test]
    fn deterministic() {
        for kind in [
            SceneKind::PiecewiseConstantShapes,
            SceneKind::SmoothGradient,
            SceneKind::SinusoidTexture,
        ] {
            let spec = SceneSpec::new(kind, 24, 11);
            let a: ImagePatch<f64> = generate_scene(&spec).unwrap();
            let b: ImagePatch<f64> = generate_scene(&spec).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn generation_audit() {
        let mut multi_level = 0;
        for s in 0..1000u64 {
            let spec = SceneSpec::new(SceneKind::PiecewiseConstantShapes, 16, s);
            let img: ImagePatch<f64> = generate_scene(&spec).unwrap();
            assert!(img.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
            let first = img.pixels()[0];
            if img.pixels().iter().any(|&v| v != first) {
                multi_level += 1;
            }
        }
        assert!(multi_level >= 990, "{multi_level}");
        for kind in [SceneKind::SmoothGradient, SceneKind::SinusoidTexture] {
            for s in 0..100u64 {
                let img: ImagePatch<f64> = generate_scene(&SceneSpec::new(kind, 16, s)).unwrap();
                assert!(img.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn rejects_bad_range() {
        let spec = SceneSpec {
            intensity_lo: 0.8,
            intensity_hi: 0.2,
            ..SceneSpec::new(SceneKind::SmoothGradient, 8, 0)
        };
        assert!(generate_scene::<f64>(&spec).is_err());
    }
}
