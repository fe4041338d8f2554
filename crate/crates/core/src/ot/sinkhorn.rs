//! Entropy-regularized transport in the log domain, with epsilon scaling.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::measure::{ground_cost_matrix, CostSpec, Coupling, EmpiricalMeasure, Matrix};

#[derive(Debug, Clone, Copy)]
pub struct SinkhornParams<T> {
    pub epsilon: T,
    pub max_iter: usize,
    /// Bound on the L1 marginal violation at exit.
    pub tol: T,
}

impl<T: Scalar> SinkhornParams<T> {
    pub fn new(epsilon: T) -> Self {
        Self {
            epsilon,
            max_iter: 200_000,
            tol: T::lit(1e-9).max(T::epsilon() * T::lit(64.0)),
        }
    }
}

fn logsumexp<T: Scalar>(vals: impl Iterator<Item = T> + Clone) -> T {
    let mx = vals.clone().fold(T::neg_infinity(), |m, v| m.max(v));
    if mx == T::neg_infinity() {
        return mx;
    }
    mx + vals.map(|v| (v - mx).exp()).sum::<T>().ln()
}

/// Returns the entropic plan and its transport cost `sum P_ij C_ij`
/// (the entropy term is not included in the value).
pub fn sinkhorn<T: Scalar>(
    a: &EmpiricalMeasure<T>,
    b: &EmpiricalMeasure<T>,
    cost: &CostSpec<T>,
    params: &SinkhornParams<T>,
) -> Result<(Coupling<T>, T)> {
    if !(params.epsilon > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {}",
            params.epsilon
        )));
    }
    let c = ground_cost_matrix(a, b, cost)?;
    sinkhorn_matrix(a.weights(), b.weights(), &c, params)
}

pub fn sinkhorn_matrix<T: Scalar>(
    wa: &[T],
    wb: &[T],
    c: &Matrix<T>,
    params: &SinkhornParams<T>,
) -> Result<(Coupling<T>, T)> {
    let (n, m) = (wa.len(), wb.len());
    let log_a: Vec<T> = wa.iter().map(|w| w.ln()).collect();
    let log_b: Vec<T> = wb.iter().map(|w| w.ln()).collect();
    let mut f = vec![T::zero(); n];
    let mut g = vec![T::zero(); m];

    let target = params.epsilon;
    let mut eps = c.max_abs().max(target);
    let mut iterations = 0usize;
    let mut err = T::infinity();

    loop {
        let last_stage = eps <= target;
        let stage_tol = if last_stage { params.tol } else { params.tol.max(T::lit(1e-3)) };
        let stage_cap = if last_stage { params.max_iter } else { 500 };
        let mut stage_iters = 0;
        while stage_iters < stage_cap && iterations < params.max_iter {
            for i in 0..n {
                f[i] = if wa[i] > T::zero() {
                    eps * log_a[i]
                        - eps * logsumexp((0..m).map(|j| (g[j] - c.get(i, j)) / eps))
                } else {
                    T::neg_infinity()
                };
            }
            for j in 0..m {
                g[j] = if wb[j] > T::zero() {
                    eps * log_b[j]
                        - eps * logsumexp((0..n).map(|i| (f[i] - c.get(i, j)) / eps))
                } else {
                    T::neg_infinity()
                };
            }
            iterations += 1;
            stage_iters += 1;
            // Columns are exact after the g-update; measure the row violation.
            err = (0..n)
                .map(|i| {
                    let s: T = (0..m)
                        .map(|j| plan_entry(f[i], g[j], c.get(i, j), eps))
                        .sum();
                    (s - wa[i]).abs()
                })
                .sum();
            if !err.is_finite() {
                return Err(Error::NonFinite("sinkhorn marginal error".into()));
            }
            if err <= stage_tol {
                break;
            }
        }
        if last_stage {
            break;
        }
        if iterations >= params.max_iter {
            break;
        }
        eps = (eps * T::lit(0.5)).max(target);
    }
    if err > params.tol || eps > target {
        return Err(Error::NotConverged {
            iterations,
            marginal_error: err.as_f64(),
        });
    }
    let plan = Matrix::from_fn(n, m, |i, j| plan_entry(f[i], g[j], c.get(i, j), eps));
    let coupling = Coupling::from_plan(plan);
    let value = coupling.cost(c);
    Ok((coupling, value))
}

#[inline]
fn plan_entry<T: Scalar>(f: T, g: T, c: T, eps: T) -> T {
    if f == T::neg_infinity() || g == T::neg_infinity() {
        T::zero()
    } else {
        ((f + g - c) / eps).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1(points: &[f64]) -> EmpiricalMeasure<f64> {
        EmpiricalMeasure::uniform(points.iter().map(|p| vec![*p]).collect()).unwrap()
    }

    #[test]
    fn rejects_nonpositive_epsilon() {
        let a = m1(&[0.0]);
        assert!(sinkhorn(&a, &a, &CostSpec::w1(), &SinkhornParams::new(0.0)).is_err());
    }

    #[test]
    fn reports_nonconvergence() {
        let a = m1(&[0.0, 1.0, 2.0]);
        let b = m1(&[0.5, 1.7, 4.0]);
        let mut p = SinkhornParams::new(1e-3);
        p.max_iter = 3;
        match sinkhorn(&a, &b, &CostSpec::w1(), &p) {
            Err(Error::NotConverged { iterations, marginal_error }) => {
                assert_eq!(iterations, 3);
                assert!(marginal_error > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn two_point_small_epsilon() {
        let (plan, v) = sinkhorn(&m1(&[0.0, 2.0]), &m1(&[1.0, 3.0]), &CostSpec::w1(), &SinkhornParams::new(1e-3)).unwrap();
        assert!((v - 1.0).abs() <= 1e-2);
        assert!(plan.min_entry() >= 0.0);
    }

    #[test]
    fn zero_weight_rows_are_empty() {
        let a = EmpiricalMeasure::new(vec![vec![0.0], vec![9.0]], vec![1.0, 0.0]).unwrap();
        let b = m1(&[1.0, 2.0]);
        let (plan, v) = sinkhorn(&a, &b, &CostSpec::w1(), &SinkhornParams::new(1e-2)).unwrap();
        assert_eq!(plan.get(1, 0), 0.0);
        assert!((v - 1.5).abs() < 1e-6);
    }
}
