//! Training objectives and their gradients w.r.t. network parameters.

use serde::{Deserialize, Serialize};

use super::critic::CriticSpec;
use super::net::{backward_batch, forward_batch, DenoiserParams};
use crate::error::{Error, Result};
use crate::image::ImagePatch;
use crate::metrics::flatten_patches;
use crate::ot::{euclidean, kantorovich_lp, Coupling, CostSpec, EmpiricalMeasure};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Fidelity to the noisy input plus `lambda` times the distribution penalty.
    Relaxed,
    /// Distribution penalty alone; the input is free to be ignored.
    DistOnly,
    /// Mean absolute error to a paired target (clean or second noisy draw).
    Supervised,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    /// Exact W1 between the output batch and an unpaired clean batch.
    ExactMinibatchW1,
    /// Neural critic trained with a gradient penalty.
    CriticWganGp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub objective: Objective,
    /// Fidelity exponent on the Euclidean norm.
    pub beta: f64,
    pub lambda: f64,
    pub penalty: PenaltyMode,
    pub critic: Option<CriticSpec>,
}

impl LossSpec {
    pub fn relaxed(lambda: f64) -> Self {
        Self {
            objective: Objective::Relaxed,
            beta: 1.0,
            lambda,
            penalty: PenaltyMode::ExactMinibatchW1,
            critic: None,
        }
    }

    pub fn dist_only() -> Self {
        Self { objective: Objective::DistOnly, lambda: 1.0, ..Self::relaxed(1.0) }
    }

    pub fn supervised() -> Self {
        Self { objective: Objective::Supervised, lambda: 0.0, ..Self::relaxed(0.0) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 1.0) || !self.beta.is_finite() {
            return Err(Error::InvalidArgument(format!("beta must be >= 1, got {}", self.beta)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.penalty == PenaltyMode::CriticWganGp {
            match &self.critic {
                Some(c) => c.validate()?,
                None => return Err(Error::InvalidArgument("critic mode needs a critic spec".into())),
            }
        }
        Ok(())
    }
}

/// Loss value and its components, averaged over the batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub loss: f64,
    /// `(1/B) sum ||y - f(y)||^beta`.
    pub fidelity: f64,
    /// Minibatch W1 between outputs and the clean batch (0 when not computed).
    pub w1: f64,
}

/// Exact W1 between the uniform empirical measures of two patch batches.
pub fn minibatch_w1<T: Scalar>(outputs: &[ImagePatch<T>], clean: &[ImagePatch<T>]) -> Result<(Coupling<T>, T)> {
    let (d, z) = flatten_patches(outputs)?;
    let (dc, x) = flatten_patches(clean)?;
    if d != dc {
        return Err(Error::DimensionMismatch { expected: d, found: dc });
    }
    kantorovich_lp(&EmpiricalMeasure::uniform_flat(d, z)?, &EmpiricalMeasure::uniform_flat(d, x)?, &CostSpec::w1())
}

/// `d/dz ||z - y||^beta`, with the zero vector at `z == y`.
fn fidelity_grad<T: Scalar>(z: &[T], y: &[T], beta: T, scale: T, out: &mut [T]) -> T {
    let r = euclidean(z, y);
    let val = r.powf(beta);
    if r > T::zero() {
        let coef = scale * beta * r.powf(beta - T::lit(2.0));
        for ((o, &a), &b) in out.iter_mut().zip(z).zip(y) {
            *o += coef * (a - b);
        }
    }
    val
}

/// Envelope subgradient of the W1 term for a fixed optimal coupling:
/// `sum_j pi_ij (z_i - x_j) / ||z_i - x_j||`, zero where the points coincide.
pub fn w1_subgradient<T: Scalar>(coupling: &Coupling<T>, z: &[&[T]], x: &[&[T]], scale: T, out: &mut [Vec<T>]) {
    for (i, zi) in z.iter().enumerate() {
        for (j, xj) in x.iter().enumerate() {
            let p = coupling.get(i, j);
            if p <= T::zero() {
                continue;
            }
            let r = euclidean(zi, xj);
            if r == T::zero() {
                continue;
            }
            let coef = scale * p / r;
            for ((o, &a), &b) in out[i].iter_mut().zip(zi.iter()).zip(xj.iter()) {
                *o += coef * (a - b);
            }
        }
    }
}

fn check_batches<T: Scalar>(noisy: &[ImagePatch<T>], other: &[ImagePatch<T>]) -> Result<()> {
    if noisy.is_empty() || noisy.len() != other.len() {
        return Err(Error::ShapeMismatch(format!(
            "batch sizes {} and {} must be equal and positive",
            noisy.len(),
            other.len()
        )));
    }
    Ok(())
}

/// Loss and gradient for the exact-W1 objectives. `clean` is an unpaired
/// clean batch for [`Objective::Relaxed`] and [`Objective::DistOnly`], and the
/// paired target batch for [`Objective::Supervised`].
pub fn loss_and_grad<T: Scalar>(
    params: &DenoiserParams<T>,
    loss: &LossSpec,
    noisy: &[ImagePatch<T>],
    clean: &[ImagePatch<T>],
) -> Result<(LossParts, Vec<T>)> {
    check_batches(noisy, clean)?;
    if loss.penalty != PenaltyMode::ExactMinibatchW1 && loss.objective != Objective::Supervised {
        return Err(Error::InvalidArgument("critic penalty is handled by the training loop".into()));
    }
    let traces = forward_batch(params, noisy)?;
    let b = T::from_usize_lossy(noisy.len());
    let outputs: Vec<&[T]> = traces.iter().map(|t| t.output()).collect();
    let mut grad_out: Vec<Vec<T>> = outputs.iter().map(|o| vec![T::zero(); o.len()]).collect();
    let beta = T::lit(loss.beta);
    let mut fidelity = T::zero();
    let fid_scale = if loss.objective == Objective::Relaxed { T::one() / b } else { T::zero() };
    for (i, (z, y)) in outputs.iter().zip(noisy).enumerate() {
        fidelity += fidelity_grad(z, y.pixels(), beta, fid_scale, &mut grad_out[i]);
    }
    fidelity /= b;
    let mut parts = LossParts { fidelity: fidelity.as_f64(), ..LossParts::default() };
    match loss.objective {
        Objective::Supervised => {
            let n = T::from_usize_lossy(outputs[0].len()) * b;
            let mut total = T::zero();
            for (i, (z, t)) in outputs.iter().zip(clean).enumerate() {
                for ((g, &a), &c) in grad_out[i].iter_mut().zip(z.iter()).zip(t.pixels()) {
                    let d = a - c;
                    total += d.abs();
                    if d != T::zero() {
                        *g += d.signum() / n;
                    }
                }
            }
            parts.loss = (total / n).as_f64();
        }
        Objective::Relaxed | Objective::DistOnly => {
            let z: Vec<ImagePatch<T>> = outputs
                .iter()
                .zip(noisy)
                .map(|(o, y)| ImagePatch::new(y.height(), y.width(), o.to_vec()))
                .collect::<Result<_>>()?;
            let (coupling, w1) = minibatch_w1(&z, clean)?;
            let weight = if loss.objective == Objective::Relaxed { T::lit(loss.lambda) } else { T::one() };
            let xs: Vec<&[T]> = clean.iter().map(|c| c.pixels()).collect();
            if weight > T::zero() {
                w1_subgradient(&coupling, &outputs, &xs, weight, &mut grad_out);
            }
            parts.w1 = w1.as_f64();
            parts.loss = if loss.objective == Objective::Relaxed {
                (fidelity + weight * w1).as_f64()
            } else {
                w1.as_f64()
            };
        }
    }
    let grad = backward_batch(params, &traces, &grad_out);
    Ok((parts, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::NetSpec;
    use crate::rng::rng_from_seed;
    use rand::Rng as _;

    fn batch(seed: u64, b: usize) -> Vec<ImagePatch<f64>> {
        let mut rng = rng_from_seed(seed);
        (0..b).map(|_| ImagePatch::from_fn(8, 8, |_, _| rng.random::<f64>())).collect()
    }

    #[test]
    fn identity_on_matching_sets_is_zero() {
        let p = DenoiserParams::<f64>::init(NetSpec::toy(), 0);
        let y = batch(1, 4);
        let mut shuffled = y.clone();
        shuffled.rotate_left(1);
        let (parts, grad) = loss_and_grad(&p, &LossSpec::relaxed(2.0), &y, &shuffled).unwrap();
        assert_eq!(parts.loss, 0.0);
        assert!(grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn zero_lambda_identity_is_zero() {
        let p = DenoiserParams::<f64>::init(NetSpec::toy(), 0);
        let (parts, _) = loss_and_grad(&p, &LossSpec::relaxed(0.0), &batch(1, 4), &batch(2, 4)).unwrap();
        assert_eq!(parts.loss, 0.0);
        assert!(parts.w1 > 0.0);
    }

    #[test]
    fn penalty_matches_lp() {
        let p = DenoiserParams::<f64>::random(NetSpec::toy(), 5);
        let y = batch(1, 4);
        let x = batch(2, 4);
        let (parts, _) = loss_and_grad(&p, &LossSpec::dist_only(), &y, &x).unwrap();
        let out = crate::denoiser::forward(&p, &y).unwrap();
        let (_, w1) = minibatch_w1(&out, &x).unwrap();
        assert_eq!(parts.w1, w1);
        assert_eq!(parts.loss, w1);
    }

    #[test]
    fn size_mismatch() {
        let p = DenoiserParams::<f64>::init(NetSpec::toy(), 0);
        assert!(loss_and_grad(&p, &LossSpec::relaxed(1.0), &batch(1, 4), &batch(2, 3)).is_err());
    }
}
