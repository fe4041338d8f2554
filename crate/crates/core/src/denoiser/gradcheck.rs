//! Central finite-difference check of [`loss_and_grad`](super::loss_and_grad).

use serde::{Deserialize, Serialize};

use super::loss::{loss_and_grad, minibatch_w1, LossSpec, Objective};
use super::net::{forward_batch, DenoiserParams};
use crate::error::Result;
use crate::image::ImagePatch;
use crate::ot::euclidean;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    /// Coordinates compared against finite differences.
    pub checked: usize,
    /// Coordinates whose stencil crosses a ReLU boundary or changes the
    /// support of the optimal coupling; finite differences are no oracle there.
    pub kinked: usize,
    pub worst_relative_error: f64,
}

/// Loss recomputed from the forward pass alone, together with the linear
/// region it lies in (ReLU patterns of every sample plus coupling support).
fn value_and_region(
    params: &DenoiserParams<f64>,
    loss: &LossSpec,
    noisy: &[ImagePatch<f64>],
    target: &[ImagePatch<f64>],
) -> Result<(f64, Vec<bool>)> {
    let traces = forward_batch(params, noisy)?;
    let mut region: Vec<bool> = traces.iter().flat_map(|t| t.relu_pattern(&params.spec)).collect();
    let b = noisy.len() as f64;
    let outputs: Vec<ImagePatch<f64>> = traces
        .iter()
        .zip(noisy)
        .map(|(t, y)| ImagePatch::new(y.height(), y.width(), t.output().to_vec()))
        .collect::<Result<_>>()?;
    let value = match loss.objective {
        Objective::Supervised => {
            let n = b * outputs[0].len() as f64;
            let total: f64 = outputs
                .iter()
                .zip(target)
                .flat_map(|(z, t)| z.pixels().iter().zip(t.pixels()).map(|(a, c)| (a - c).abs()))
                .sum();
            total / n
        }
        Objective::Relaxed | Objective::DistOnly => {
            let (coupling, w1) = minibatch_w1(&outputs, target)?;
            region.extend(coupling.plan().as_slice().iter().map(|&v| v > 1e-12));
            if loss.objective == Objective::DistOnly {
                w1
            } else {
                let fid: f64 = outputs
                    .iter()
                    .zip(noisy)
                    .map(|(z, y)| euclidean(z.pixels(), y.pixels()).powf(loss.beta))
                    .sum::<f64>()
                    / b;
                fid + loss.lambda * w1
            }
        }
    };
    Ok((value, region))
}

/// Compares the analytic gradient with central differences of step `h` on
/// every coordinate where `|grad| > min_grad`. The relative error is
/// `|fd - g| / max(|fd|, |g|)`.
pub fn check_gradient(
    params: &DenoiserParams<f64>,
    loss: &LossSpec,
    noisy: &[ImagePatch<f64>],
    target: &[ImagePatch<f64>],
    h: f64,
    min_grad: f64,
) -> Result<GradCheck> {
    let (_, grad) = loss_and_grad(params, loss, noisy, target)?;
    let (_, base) = value_and_region(params, loss, noisy, target)?;
    let mut out = GradCheck { checked: 0, kinked: 0, worst_relative_error: 0.0 };
    let mut p = params.clone();
    for (k, &g) in grad.iter().enumerate() {
        if g.abs() <= min_grad {
            continue;
        }
        let orig = p.values[k];
        p.values[k] = orig + h;
        let (fp, rp) = value_and_region(&p, loss, noisy, target)?;
        p.values[k] = orig - h;
        let (fm, rm) = value_and_region(&p, loss, noisy, target)?;
        p.values[k] = orig;
        if rp != base || rm != base {
            out.kinked += 1;
            continue;
        }
        let fd = (fp - fm) / (2.0 * h);
        let rel = (fd - g).abs() / fd.abs().max(g.abs());
        out.checked += 1;
        out.worst_relative_error = out.worst_relative_error.max(rel);
    }
    Ok(out)
}
