//! Reference restorations: classical filters and the supervised,
//! noisy-target and distribution-only training baselines.

use crate::datasets::DomainPair;
use crate::denoiser::{train, LossSpec, NetSpec, Objective, TrainOutcome, TrainSettings, Validation};
use crate::error::{Error, Result};
use crate::image::ImagePatch;
use crate::noise::gaussian_kernel;
use crate::scalar::Scalar;

pub fn baseline_identity<T: Scalar>(x: &ImagePatch<T>) -> ImagePatch<T> {
    x.clone()
}

/// Normalized Gaussian blur with a `2 ceil(2 sigma) + 1` kernel.
pub fn baseline_gaussian_filter<T: Scalar>(x: &ImagePatch<T>, sigma: f64) -> Result<ImagePatch<T>> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("filter sigma must be > 0, got {sigma}")));
    }
    let size = 2 * (2.0 * sigma).ceil() as usize + 1;
    x.convolve_reflect(&gaussian_kernel(size, T::lit(sigma))?)
}

/// `k x k` median with reflect padding.
pub fn baseline_median_filter<T: Scalar>(x: &ImagePatch<T>, k: usize) -> Result<ImagePatch<T>> {
    if k.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("median window must be odd, got {k}")));
    }
    let r = k / 2;
    if r >= x.height() || r >= x.width() {
        return Err(Error::InvalidArgument(format!(
            "median window {k} exceeds a {}x{} patch",
            x.height(),
            x.width()
        )));
    }
    let mut window = Vec::with_capacity(k * k);
    Ok(ImagePatch::from_fn(x.height(), x.width(), |row, col| {
        window.clear();
        for dy in -(r as isize)..=r as isize {
            for dx in -(r as isize)..=r as isize {
                window.push(x.get_reflect(row as isize + dy, col as isize + dx));
            }
        }
        window.sort_by(|a, b| a.partial_cmp(b).expect("finite pixels"));
        window[window.len() / 2]
    }))
}

fn with_objective(settings: &TrainSettings, loss: LossSpec) -> TrainSettings {
    TrainSettings { loss, ..settings.clone() }
}

fn require_pairing<T>(domains: &DomainPair<T>) -> Result<()> {
    if !domains.paired {
        return Err(Error::InvalidArgument("supervised baselines need a paired domain".into()));
    }
    Ok(())
}

/// Supervised L1 to the clean source of each noisy patch.
pub fn train_n2c<T: Scalar>(
    spec: &NetSpec,
    settings: &TrainSettings,
    domains: &DomainPair<T>,
    val: Option<Validation<'_, T>>,
) -> Result<TrainOutcome<T>> {
    require_pairing(domains)?;
    let s = with_objective(settings, LossSpec::supervised());
    train(spec, &s, &domains.noisy_patches, &domains.noisy_sources, val)
}

/// L1 to an independent second noisy realization of the same clean patch.
pub fn train_n2n<T: Scalar>(
    spec: &NetSpec,
    settings: &TrainSettings,
    domains: &DomainPair<T>,
    val: Option<Validation<'_, T>>,
) -> Result<TrainOutcome<T>> {
    require_pairing(domains)?;
    let s = with_objective(settings, LossSpec::supervised());
    train(spec, &s, &domains.noisy_patches, &domains.noisy_second, val)
}

/// Distribution penalty only, on unpaired clean and noisy domains.
pub fn train_dist_only<T: Scalar>(
    spec: &NetSpec,
    settings: &TrainSettings,
    domains: &DomainPair<T>,
    val: Option<Validation<'_, T>>,
) -> Result<TrainOutcome<T>> {
    let loss = LossSpec {
        objective: Objective::DistOnly,
        ..settings.loss.clone()
    };
    let s = with_objective(settings, loss);
    train(spec, &s, &domains.noisy_patches, &domains.clean_patches, val)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{add_gaussian, NoiseSpec};

    #[test]
    fn identity_is_identity() {
        let x = ImagePatch::from_fn(4, 5, |r, c| (r + c) as f64 / 10.0);
        assert_eq!(baseline_identity(&x), x);
    }

    #[test]
    fn median_removes_impulse() {
        let mut x = ImagePatch::filled(7, 7, 0.3);
        x.set(3, 3, 1.0);
        let y = baseline_median_filter(&x, 3).unwrap();
        assert!(y.pixels().iter().all(|&v| v == 0.3));
        assert!(baseline_median_filter(&x, 4).is_err());
        assert!(baseline_median_filter(&ImagePatch::filled(2, 2, 0.0), 5).is_err());
    }

    #[test]
    fn gaussian_filter_reduces_noise() {
        let x = ImagePatch::filled(64, 64, 0.5);
        let y = add_gaussian(&x, &NoiseSpec::gaussian(0.1, 3)).unwrap();
        let f = baseline_gaussian_filter(&y, 1.0).unwrap();
        let std = |p: &ImagePatch<f64>| {
            let m = p.mean();
            (p.pixels().iter().map(|v| (v - m).powi(2)).sum::<f64>() / p.len() as f64).sqrt()
        };
        assert!(std(&f) < std(&y));
        let k = gaussian_kernel::<f64>(5, 1.0).unwrap();
        let energy: f64 = k.as_slice().iter().map(|v| v * v).sum();
        assert!((std(&f) / std(&y) - energy.sqrt()).abs() < 0.1);
        assert!(baseline_gaussian_filter(&ImagePatch::filled(2, 2, 0.0), 1.0).is_err());
    }
}
