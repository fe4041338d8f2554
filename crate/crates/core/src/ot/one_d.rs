use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::measure::EmpiricalMeasure;

/// Wasserstein-1 distance between two 1-D measures, computed as the integral
/// of `|F_a - F_b|` over the merged sorted support.
pub fn w1_1d<T: Scalar>(a: &EmpiricalMeasure<T>, b: &EmpiricalMeasure<T>) -> Result<T> {
    for m in [a, b] {
        if m.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: m.dim(),
            });
        }
    }
    let mut events: Vec<(T, T)> = a
        .points()
        .zip(a.weights())
        .map(|(p, w)| (p[0], *w))
        .chain(b.points().zip(b.weights()).map(|(p, w)| (p[0], -*w)))
        .collect();
    events.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite support"));

    let mut cdf_gap = T::zero();
    let mut total = T::zero();
    for pair in events.windows(2) {
        cdf_gap += pair[0].1;
        total += cdf_gap.abs() * (pair[1].0 - pair[0].0);
    }
    Ok(total)
}
