//! Synthetic degradations: additive white Gaussian, Poisson shot noise and
//! spatially correlated ("Brown") Gaussian noise, plus statistical audits.

use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImagePatch;
use crate::ot::Matrix;
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Poisson,
    BrownGaussian,
}

impl NoiseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Poisson => "poisson",
            NoiseKind::BrownGaussian => "brown_gaussian",
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NoiseKind::Gaussian),
            "poisson" => Ok(NoiseKind::Poisson),
            "brown_gaussian" => Ok(NoiseKind::BrownGaussian),
            other => Err(Error::InvalidArgument(format!("unknown noise kind `{other}`"))),
        }
    }
}

/// Parameters of one degradation. `sigma` is a standard deviation in `[0, 1]`
/// pixel units (8-bit level `s` corresponds to `s / 255`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub sigma: f64,
    /// Maximum event count of the Poisson model.
    pub lambda_p: f64,
    pub kernel_size: usize,
    pub kernel_sigma: f64,
    pub clip: bool,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            sigma,
            ..Self::default_with_seed(seed)
        }
    }

    pub fn poisson(lambda_p: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::Poisson,
            lambda_p,
            ..Self::default_with_seed(seed)
        }
    }

    pub fn brown_gaussian(sigma: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::BrownGaussian,
            sigma,
            ..Self::default_with_seed(seed)
        }
    }

    fn default_with_seed(seed: u64) -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            sigma: 25.0 / 255.0,
            lambda_p: 30.0,
            kernel_size: 5,
            kernel_sigma: 1.0,
            clip: false,
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_clip(mut self, clip: bool) -> Self {
        self.clip = clip;
        self
    }

    /// Spec for the `index`-th patch of a batch: same parameters, seed
    /// `splitmix64(seed ^ index)`.
    pub fn for_patch(&self, index: u64) -> Self {
        self.with_seed(derive_seed(self.seed, index))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.lambda_p > 0.0) || !self.lambda_p.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "lambda_p must be > 0, got {}",
                self.lambda_p
            )));
        }
        if self.kernel_size < 3 || self.kernel_size.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "kernel_size must be odd and >= 3, got {}",
                self.kernel_size
            )));
        }
        if !(self.kernel_sigma > 0.0) {
            return Err(Error::InvalidArgument("kernel_sigma must be > 0".into()));
        }
        Ok(())
    }
}

fn require_kind(spec: &NoiseSpec, kind: NoiseKind) -> Result<()> {
    spec.validate()?;
    if spec.kind != kind {
        return Err(Error::InvalidArgument(format!(
            "spec is {}, expected {}",
            spec.kind.as_str(),
            kind.as_str()
        )));
    }
    Ok(())
}

fn finish<T: Scalar>(mut y: ImagePatch<T>, clip: bool) -> ImagePatch<T> {
    if clip {
        y = y.clipped();
    }
    y
}

fn white_field<T: Scalar>(h: usize, w: usize, sigma: f64, rng: &mut Rng) -> ImagePatch<T> {
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    ImagePatch::from_fn(h, w, |_, _| T::lit(normal.sample(rng)))
}

/// `y = x + n`, `n` i.i.d. `N(0, sigma^2)` per pixel.
pub fn add_gaussian<T: Scalar>(x: &ImagePatch<T>, spec: &NoiseSpec) -> Result<ImagePatch<T>> {
    require_kind(spec, NoiseKind::Gaussian)?;
    if spec.sigma == 0.0 {
        return Ok(finish(x.clone(), spec.clip));
    }
    let mut rng = rng_from_seed(spec.seed);
    let n = white_field::<T>(x.height(), x.width(), spec.sigma, &mut rng);
    let mut y = x.clone();
    for (p, e) in y.pixels_mut().iter_mut().zip(n.pixels()) {
        *p += *e;
    }
    Ok(finish(y, spec.clip))
}

/// `y = Poisson(lambda_p * x) / lambda_p` per pixel.
pub fn add_poisson<T: Scalar>(x: &ImagePatch<T>, spec: &NoiseSpec) -> Result<ImagePatch<T>> {
    require_kind(spec, NoiseKind::Poisson)?;
    let mut rng = rng_from_seed(spec.seed);
    let lp = spec.lambda_p;
    let mut y = x.map(|_| T::zero());
    for (out, v) in y.pixels_mut().iter_mut().zip(x.pixels()) {
        let rate = lp * v.as_f64().max(0.0);
        *out = if rate > 0.0 {
            let k: f64 = Poisson::new(rate).expect("positive rate").sample(&mut rng);
            T::lit(k / lp)
        } else {
            T::zero()
        };
    }
    Ok(finish(y, spec.clip))
}

/// White Gaussian field low-passed by a Gaussian kernel (reflect padding) and
/// rescaled by `1 / ||kernel||_2` so the marginal variance stays `sigma^2`.
pub fn brown_noise_field<T: Scalar>(
    height: usize,
    width: usize,
    spec: &NoiseSpec,
    rng: &mut Rng,
) -> Result<ImagePatch<T>> {
    let kernel = gaussian_kernel::<T>(spec.kernel_size, T::lit(spec.kernel_sigma))?;
    let energy: T = kernel.as_slice().iter().map(|k| *k * *k).sum();
    let scale = T::one() / energy.sqrt();
    let white = white_field::<T>(height, width, spec.sigma, rng);
    Ok(white.convolve_reflect(&kernel)?.map(|v| v * scale))
}

pub fn add_brown_gaussian<T: Scalar>(x: &ImagePatch<T>, spec: &NoiseSpec) -> Result<ImagePatch<T>> {
    require_kind(spec, NoiseKind::BrownGaussian)?;
    if spec.sigma == 0.0 {
        return Ok(finish(x.clone(), spec.clip));
    }
    let mut rng = rng_from_seed(spec.seed);
    let n = brown_noise_field::<T>(x.height(), x.width(), spec, &mut rng)?;
    let mut y = x.clone();
    for (p, e) in y.pixels_mut().iter_mut().zip(n.pixels()) {
        *p += *e;
    }
    Ok(finish(y, spec.clip))
}

/// Dispatches on `spec.kind`.
pub fn degrade<T: Scalar>(x: &ImagePatch<T>, spec: &NoiseSpec) -> Result<ImagePatch<T>> {
    match spec.kind {
        NoiseKind::Gaussian => add_gaussian(x, spec),
        NoiseKind::Poisson => add_poisson(x, spec),
        NoiseKind::BrownGaussian => add_brown_gaussian(x, spec),
    }
}

/// Normalized `size x size` Gaussian kernel, entries proportional to
/// `exp(-(i^2 + j^2) / (2 sigma^2))` with `i, j` centered offsets.
pub fn gaussian_kernel<T: Scalar>(size: usize, sigma: T) -> Result<Matrix<T>> {
    if size.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("kernel size must be odd, got {size}")));
    }
    if !(sigma > T::zero()) {
        return Err(Error::InvalidArgument("kernel sigma must be > 0".into()));
    }
    let r = (size / 2) as isize;
    let two_s2 = T::lit(2.0) * sigma * sigma;
    let mut k = Matrix::from_fn(size, size, |i, j| {
        let di = T::lit((i as isize - r) as f64);
        let dj = T::lit((j as isize - r) as f64);
        (-(di * di + dj * dj) / two_s2).exp()
    });
    let total: T = k.as_slice().iter().copied().sum();
    for i in 0..size {
        for j in 0..size {
            k.set(i, j, k.get(i, j) / total);
        }
    }
    Ok(k)
}

/// Empirical lag-1 autocorrelation of a zero-mean field, averaged over the
/// horizontal and vertical directions.
pub fn lag1_autocorrelation<T: Scalar>(field: &ImagePatch<T>) -> f64 {
    let mean = field.mean().as_f64();
    let v = |r: usize, c: usize| field.get(r, c).as_f64() - mean;
    let (h, w) = field.shape();
    let var: f64 = field.pixels().iter().map(|p| (p.as_f64() - mean).powi(2)).sum::<f64>()
        / (h * w) as f64;
    let mut acc = 0.0;
    let mut count = 0usize;
    for r in 0..h {
        for c in 0..w {
            if c + 1 < w {
                acc += v(r, c) * v(r, c + 1);
                count += 1;
            }
            if r + 1 < h {
                acc += v(r, c) * v(r + 1, c);
                count += 1;
            }
        }
    }
    if count == 0 || var == 0.0 {
        return 0.0;
    }
    acc / count as f64 / var
}

/// Lag-1 autocorrelation of white noise filtered by `kernel`, from the
/// kernel's autocorrelation: `sum k(i,j) k(i,j+1) / sum k(i,j)^2`.
pub fn kernel_lag1_autocorrelation<T: Scalar>(kernel: &Matrix<T>) -> f64 {
    let (h, w) = (kernel.rows(), kernel.cols());
    let energy: f64 = kernel.as_slice().iter().map(|k| k.as_f64().powi(2)).sum();
    let mut lag = 0.0;
    for i in 0..h {
        for j in 0..w.saturating_sub(1) {
            lag += kernel.get(i, j).as_f64() * kernel.get(i, j + 1).as_f64();
        }
    }
    lag / energy
}

/// Moments of the noise `y - x` produced by one spec on a constant image.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseAudit {
    pub kind: NoiseKind,
    pub size: usize,
    pub level: f64,
    pub mean: f64,
    pub variance: f64,
    pub expected_variance: f64,
    pub lag1_autocorrelation: f64,
    pub expected_lag1_autocorrelation: f64,
    pub mean_bound: f64,
    pub mean_ok: bool,
    pub variance_ok: bool,
    pub autocorrelation_ok: bool,
}

impl NoiseAudit {
    pub fn passed(&self) -> bool {
        self.mean_ok && self.variance_ok && self.autocorrelation_ok
    }
}

/// Synthesizes noise on a constant `size x size` image at intensity `level`
/// (no clipping) and checks its moments against the model:
///
/// * mean of `y - x` within 3 standard errors of 0,
/// * variance within 20% (Poisson) or 10% (Gaussian kinds) of the model,
/// * lag-1 autocorrelation below 0.05 for white noise, above 0.5 and within
///   0.05 of the kernel prediction for Brown noise.
pub fn audit(spec: &NoiseSpec, size: usize, level: f64) -> Result<NoiseAudit> {
    spec.validate()?;
    let spec = spec.with_clip(false);
    let x = ImagePatch::<f64>::filled(size, size, level);
    let y = degrade(&x, &spec)?;
    let n = ImagePatch::from_fn(size, size, |r, c| y.get(r, c) - x.get(r, c));
    let count = (size * size) as f64;
    let mean = n.mean();
    let variance = n.pixels().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
    let lag1 = lag1_autocorrelation(&n);
    let (expected_variance, expected_lag1, var_rel) = match spec.kind {
        NoiseKind::Gaussian => (spec.sigma * spec.sigma, 0.0, 0.1),
        NoiseKind::Poisson => (level / spec.lambda_p, 0.0, 0.2),
        NoiseKind::BrownGaussian => {
            let k = gaussian_kernel::<f64>(spec.kernel_size, spec.kernel_sigma)?;
            (spec.sigma * spec.sigma, kernel_lag1_autocorrelation(&k), 0.1)
        }
    };
    // Correlated noise has fewer effective samples; inflate the standard
    // error by the variance of a sum of correlated terms.
    let inflation = match spec.kind {
        NoiseKind::BrownGaussian => {
            let k = gaussian_kernel::<f64>(spec.kernel_size, spec.kernel_sigma)?;
            let energy: f64 = k.as_slice().iter().map(|v| v * v).sum();
            let total: f64 = k.as_slice().iter().sum();
            (total * total / energy).sqrt()
        }
        _ => 1.0,
    };
    let mean_bound = 3.0 * expected_variance.sqrt() / count.sqrt() * inflation;
    let mean_ok = mean.abs() <= mean_bound.max(f64::EPSILON);
    let variance_ok = if expected_variance == 0.0 {
        variance == 0.0
    } else {
        (variance / expected_variance - 1.0).abs() <= var_rel
    };
    let autocorrelation_ok = match spec.kind {
        NoiseKind::BrownGaussian => {
            spec.sigma == 0.0 || (lag1 > 0.5 && (lag1 - expected_lag1).abs() <= 0.05)
        }
        _ => lag1.abs() < 0.05,
    };
    Ok(NoiseAudit {
        kind: spec.kind,
        size,
        level,
        mean,
        variance,
        expected_variance,
        lag1_autocorrelation: lag1,
        expected_lag1_autocorrelation: expected_lag1,
        mean_bound,
        mean_ok,
        variance_ok,
        autocorrelation_ok,
    })
}
