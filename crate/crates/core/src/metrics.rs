//! Distortion metrics (PSNR, SSIM) and the patch-set Wasserstein-1 distance
//! used as the distributional metric.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImagePatch;
use crate::ot::{kantorovich_lp, CostSpec, EmpiricalMeasure};
use crate::rng::rng_from_seed;
use crate::scalar::Scalar;

/// PSNR of identical images. Reports render it as `+inf`, never as NaN.
pub const PSNR_IDENTICAL: f64 = f64::INFINITY;

pub fn mse<T: Scalar>(x: &ImagePatch<T>, y: &ImagePatch<T>) -> Result<f64> {
    x.check_same_shape(y)?;
    let s: f64 = x
        .pixels()
        .iter()
        .zip(y.pixels())
        .map(|(a, b)| (a.as_f64() - b.as_f64()).powi(2))
        .sum();
    Ok(s / x.len() as f64)
}

fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        PSNR_IDENTICAL
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

/// `10 log10(peak^2 / MSE)`, or [`PSNR_IDENTICAL`] when the images match.
pub fn psnr<T: Scalar>(x: &ImagePatch<T>, y: &ImagePatch<T>, peak: f64) -> Result<f64> {
    Ok(psnr_from_mse(mse(x, y)?, peak))
}

/// PSNR of the pooled MSE over a set of patch pairs.
pub fn psnr_set<T: Scalar>(xs: &[ImagePatch<T>], ys: &[ImagePatch<T>], peak: f64) -> Result<f64> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::ShapeMismatch(format!("{} vs {} patches", xs.len(), ys.len())));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (x, y) in xs.iter().zip(ys) {
        total += mse(x, y)? * x.len() as f64;
        count += x.len();
    }
    Ok(psnr_from_mse(total / count as f64, peak))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub k1: f64,
    pub k2: f64,
    pub peak: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 8,
            k1: 0.01,
            k2: 0.03,
            peak: 1.0,
        }
    }
}

/// Mean SSIM over all `window x window` positions (stride 1, uniform weights).
pub fn ssim<T: Scalar>(x: &ImagePatch<T>, y: &ImagePatch<T>, params: &SsimParams) -> Result<f64> {
    x.check_same_shape(y)?;
    let (h, w) = x.shape();
    let win = params.window;
    if win == 0 || win > h || win > w {
        return Err(Error::InvalidArgument(format!(
            "SSIM window {win} does not fit a {h}x{w} image"
        )));
    }
    let c1 = (params.k1 * params.peak).powi(2);
    let c2 = (params.k2 * params.peak).powi(2);
    let n = (win * win) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for r in 0..=h - win {
        for c in 0..=w - win {
            let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in r..r + win {
                for j in c..c + win {
                    let a = x.get(i, j).as_f64();
                    let b = y.get(i, j).as_f64();
                    sx += a;
                    sy += b;
                    sxx += a * a;
                    syy += b * b;
                    sxy += a * b;
                }
            }
            let mx = sx / n;
            let my = sy / n;
            let vx = (sxx / n - mx * mx).max(0.0);
            let vy = (syy / n - my * my).max(0.0);
            let cxy = sxy / n - mx * my;
            total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Row-major flattening of a set of equally shaped patches.
pub fn flatten_patches<T: Scalar>(patches: &[ImagePatch<T>]) -> Result<(usize, Vec<T>)> {
    let first = patches
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty patch set".into()))?;
    let dim = first.len();
    let mut data = Vec::with_capacity(dim * patches.len());
    for p in patches {
        first.check_same_shape(p)?;
        data.extend_from_slice(p.pixels());
    }
    Ok((dim, data))
}

/// Exact W1 between the uniform empirical measures of two patch sets, each
/// flattened to vectors. Sets larger than `subsample` are reduced to a
/// seeded random subset of that size first.
pub fn patchset_w1<T: Scalar>(
    a: &[ImagePatch<T>],
    b: &[ImagePatch<T>],
    subsample: usize,
    seed: u64,
) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("patch sets must be non-empty".into()));
    }
    if subsample == 0 {
        return Err(Error::InvalidArgument("subsample must be positive".into()));
    }
    let pick = |set: &[ImagePatch<T>], tag: u64| -> Vec<ImagePatch<T>> {
        if set.len() <= subsample {
            return set.to_vec();
        }
        let mut rng = rng_from_seed(crate::rng::derive_seed(seed, tag));
        let mut idx = sample(&mut rng, set.len(), subsample).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| set[i].clone()).collect()
    };
    let (da, xa) = flatten_patches(&pick(a, 0))?;
    let (db, xb) = flatten_patches(&pick(b, 1))?;
    if da != db {
        return Err(Error::DimensionMismatch { expected: da, found: db });
    }
    let ma = EmpiricalMeasure::uniform_flat(da, xa)?;
    let mb = EmpiricalMeasure::uniform_flat(db, xb)?;
    let (_, v) = kantorovich_lp(&ma, &mb, &CostSpec::w1())?;
    Ok(v.as_f64())
}

/// Text form of a dB value: `+inf` for [`PSNR_IDENTICAL`], otherwise the
/// shortest round-trip decimal.
pub fn format_db(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".to_string()
    } else {
        format!("{v}")
    }
}

/// Inverse of [`format_db`]; also accepts `inf`.
pub fn parse_db(s: &str) -> Option<f64> {
    match s.trim() {
        "+inf" | "inf" => Some(PSNR_IDENTICAL),
        t => t.parse().ok(),
    }
}

/// Serde adapter writing `+inf` as the string `"+inf"` (JSON has no infinity)
/// and NaN as `null`.
pub mod db_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_str(&super::format_db(*v))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
        Null(()),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            Some(Repr::Num(v)) => Ok(v),
            Some(Repr::Text(t)) => super::parse_db(&t).ok_or_else(|| serde::de::Error::custom(format!("bad dB value `{t}`"))),
            Some(Repr::Null(())) | None => Ok(f64::NAN),
        }
    }
}

/// Per-method evaluation on a validation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(with = "db_serde")]
    pub psnr_db: f64,
    pub ssim: f64,
    /// Patch-set W1 between the restored set and the clean set.
    pub w1_to_clean: f64,
    /// Mean `||y - f(y)||` over the validation set.
    pub fidelity_to_noisy: f64,
}

/// Mean Euclidean distance between paired patches.
pub fn mean_distance<T: Scalar>(a: &[ImagePatch<T>], b: &[ImagePatch<T>]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::ShapeMismatch(format!("{} vs {} patches", a.len(), b.len())));
    }
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b) {
        x.check_same_shape(y)?;
        total += crate::ot::euclidean(x.pixels(), y.pixels()).as_f64();
    }
    Ok(total / a.len() as f64)
}

/// PSNR/SSIM of `restored` against `clean` (after clipping `restored` to
/// `[0, 1]`), patch-set W1 to `clean`, and fidelity of `restored` to `noisy`.
pub fn evaluate<T: Scalar>(
    restored: &[ImagePatch<T>],
    noisy: &[ImagePatch<T>],
    clean: &[ImagePatch<T>],
    w1_subsample: usize,
    seed: u64,
) -> Result<MetricsReport> {
    let shown: Vec<ImagePatch<T>> = restored.iter().map(ImagePatch::clipped).collect();
    let psnr_db = psnr_set(clean, &shown, 1.0)?;
    let params = SsimParams {
        window: SsimParams::default().window.min(clean[0].height()).min(clean[0].width()),
        ..SsimParams::default()
    };
    let mut ssim_sum = 0.0;
    for (x, y) in clean.iter().zip(&shown) {
        ssim_sum += ssim(x, y, &params)?;
    }
    Ok(MetricsReport {
        psnr_db,
        ssim: ssim_sum / clean.len() as f64,
        w1_to_clean: patchset_w1(&shown, clean, w1_subsample, seed)?,
        fidelity_to_noisy: mean_distance(noisy, restored)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{add_gaussian, NoiseSpec};

    fn ramp(h: usize, w: usize) -> ImagePatch<f64> {
        ImagePatch::from_fn(h, w, |r, c| ((r * w + c) as f64 / (h * w) as f64).sin().abs())
    }

    #[test]
    fn psnr_sentinel_and_zero() {
        let x = ramp(8, 8);
        assert_eq!(psnr(&x, &x, 1.0).unwrap(), PSNR_IDENTICAL);
        let zero = ImagePatch::filled(8, 8, 0.0);
        let one = ImagePatch::filled(8, 8, 1.0);
        assert_eq!(psnr(&zero, &one, 1.0).unwrap(), 0.0);
        assert!(psnr(&zero, &ImagePatch::filled(4, 8, 0.0), 1.0).is_err());
    }

    #[test]
    fn sentinel_survives_json() {
        let r = MetricsReport { psnr_db: PSNR_IDENTICAL, ssim: 1.0, w1_to_clean: 0.0, fidelity_to_noisy: 0.0 };
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"+inf\""), "{text}");
        let back: MetricsReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.psnr_db, PSNR_IDENTICAL);
        assert_eq!(parse_db(&format_db(20.5)), Some(20.5));
    }

    #[test]
    fn psnr_decreases_with_mse() {
        let x = ImagePatch::filled(4, 4, 0.5);
        let mut last = f64::INFINITY;
        for k in 1..10 {
            let y = x.map(|v| v + 0.01 * k as f64);
            let p = psnr(&x, &y, 1.0).unwrap();
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn psnr_of_white_noise_matches_sigma() {
        // 20 log10(255 / 25) = 20.17 dB
        let x = ImagePatch::filled(256, 256, 0.5);
        let y = add_gaussian(&x, &NoiseSpec::gaussian(25.0 / 255.0, 77)).unwrap();
        let p = psnr(&x, &y, 1.0).unwrap();
        assert!((p - 20.0 * (255.0f64 / 25.0).log10()).abs() <= 0.3, "{p}");
        assert!((p - 20.17).abs() <= 0.3);
    }

    #[test]
    fn ssim_identity_inverse_symmetry() {
        let x = ramp(12, 12);
        let p = SsimParams::default();
        assert!((ssim(&x, &x, &p).unwrap() - 1.0).abs() < 1e-12);
        let inv = x.map(|v| 1.0 - v);
        assert!(ssim(&x, &inv, &p).unwrap() < 0.5);
        let y = add_gaussian(&x, &NoiseSpec::gaussian(0.1, 1)).unwrap();
        let a = ssim(&x, &y, &p).unwrap();
        let b = ssim(&y, &x, &p).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(a < 1.0);
        assert!(ssim(&ramp(4, 4), &ramp(4, 4), &p).is_err());
    }

    #[test]
    fn patchset_w1_hand_values() {
        let zeros = vec![ImagePatch::filled(8, 8, 0.0); 3];
        let ones = vec![ImagePatch::filled(8, 8, 1.0); 2];
        assert_eq!(patchset_w1(&zeros, &zeros, 64, 0).unwrap(), 0.0);
        assert!((patchset_w1(&zeros, &ones, 64, 0).unwrap() - 8.0).abs() < 1e-12);
        assert!(patchset_w1::<f64>(&[], &ones, 64, 0).is_err());
    }

    #[test]
    fn patchset_w1_subsampling_is_seeded() {
        let set: Vec<_> = (0..40).map(|k| ImagePatch::filled(2, 2, k as f64 / 40.0)).collect();
        let other: Vec<_> = (0..30).map(|k| ImagePatch::filled(2, 2, k as f64 / 35.0)).collect();
        let a = patchset_w1(&set, &other, 10, 5).unwrap();
        let b = patchset_w1(&set, &other, 10, 5).unwrap();
        assert_eq!(a, b);
    }
}
