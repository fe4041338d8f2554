use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Weighted point cloud on a finite support. Points are stored row-major in a
/// flat buffer of `len * dim` scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure<T> {
    dim: usize,
    points: Vec<T>,
    weights: Vec<T>,
}

fn weight_tol<T: Scalar>(n: usize) -> T {
    T::lit(1e-12).max(T::epsilon() * T::from_usize_lossy(8 * n.max(1)))
}

impl<T: Scalar> EmpiricalMeasure<T> {
    pub fn new(points: Vec<Vec<T>>, weights: Vec<T>) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        let flat = points.into_iter().flatten().collect();
        Self::from_flat(dim, flat, weights)
    }

    pub fn uniform(points: Vec<Vec<T>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        let w = T::one() / T::from_usize_lossy(n);
        Self::new(points, vec![w; n])
    }

    /// Uniform measure over `data.len() / dim` points stored row-major.
    pub fn uniform_flat(dim: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidMeasure(format!(
                "buffer of length {} is not a whole number of {dim}-d points",
                data.len()
            )));
        }
        let n = data.len() / dim;
        if n == 0 {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        let w = T::one() / T::from_usize_lossy(n);
        Self::from_flat(dim, data, vec![w; n])
    }

    pub fn from_flat(dim: usize, points: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("points must have dimension >= 1".into()));
        }
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        if points.len() != dim * weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} weights but {} scalars of {dim}-d points",
                weights.len(),
                points.len()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite point coordinate".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(Error::InvalidMeasure("weights must be finite and nonnegative".into()));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > weight_tol::<T>(weights.len()) {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { dim, points, weights })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[T]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// True when every weight equals `1/n` up to rounding.
    pub fn is_uniform(&self) -> bool {
        let n = self.len();
        let w = T::one() / T::from_usize_lossy(n);
        let tol = weight_tol::<T>(n);
        self.weights.iter().all(|x| (*x - w).abs() <= tol)
    }
}

/// Euclidean ground cost raised to `exponent`: `c(x, y) = ||x - y||^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSpec<T> {
    exponent: T,
}

impl<T: Scalar> CostSpec<T> {
    pub fn new(exponent: T) -> Result<Self> {
        if !(exponent >= T::one()) || !exponent.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "cost exponent must be >= 1, got {exponent}"
            )));
        }
        Ok(Self { exponent })
    }

    /// `||x - y||`, the Wasserstein-1 ground cost.
    pub fn w1() -> Self {
        Self { exponent: T::one() }
    }

    pub fn exponent(&self) -> T {
        self.exponent
    }

    pub fn eval(&self, x: &[T], y: &[T]) -> T {
        let d = euclidean(x, y);
        if self.exponent == T::one() {
            d
        } else if self.exponent == T::lit(2.0) {
            d * d
        } else {
            d.powf(self.exponent)
        }
    }
}

pub fn euclidean<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter()
        .zip(y)
        .map(|(a, b)| (*a - *b) * (*a - *b))
        .sum::<T>()
        .sqrt()
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::ShapeMismatch("ragged matrix rows".into()));
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.cols.max(1)).map(<[T]>::to_vec).collect()
    }
}

/// Kantorovich transport plan between a source measure (rows) and a target
/// measure (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling<T> {
    plan: Matrix<T>,
}

impl<T: Scalar> Coupling<T> {
    pub(crate) fn from_plan(plan: Matrix<T>) -> Self {
        Self { plan }
    }

    pub fn plan(&self) -> &Matrix<T> {
        &self.plan
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.plan.get(i, j)
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.plan.rows())
            .map(|i| self.plan.row(i).iter().copied().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<T> {
        let mut s = vec![T::zero(); self.plan.cols()];
        for i in 0..self.plan.rows() {
            for (acc, v) in s.iter_mut().zip(self.plan.row(i)) {
                *acc += *v;
            }
        }
        s
    }

    /// Largest absolute deviation of either marginal from the prescribed weights.
    pub fn marginal_error(&self, source: &EmpiricalMeasure<T>, target: &EmpiricalMeasure<T>) -> T {
        let r = self
            .row_sums()
            .iter()
            .zip(source.weights())
            .fold(T::zero(), |m, (s, w)| m.max((*s - *w).abs()));
        self.col_sums()
            .iter()
            .zip(target.weights())
            .fold(r, |m, (s, w)| m.max((*s - *w).abs()))
    }

    pub fn min_entry(&self) -> T {
        self.plan.as_slice().iter().fold(T::infinity(), |m, v| m.min(*v))
    }

    /// `sum_ij plan_ij * cost_ij`.
    pub fn cost(&self, cost: &Matrix<T>) -> T {
        self.plan
            .as_slice()
            .iter()
            .zip(cost.as_slice())
            .map(|(p, c)| *p * *c)
            .sum()
    }
}

/// Deterministic map from source support indices to target support indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TransportMap {
    pub assignment: Vec<usize>,
}

impl TransportMap {
    pub fn identity(n: usize) -> Self {
        Self {
            assignment: (0..n).collect(),
        }
    }

    pub fn is_permutation(&self) -> bool {
        let n = self.assignment.len();
        let mut seen = vec![false; n];
        for &j in &self.assignment {
            if j >= n || seen[j] {
                return false;
            }
            seen[j] = true;
        }
        true
    }
}

/// `C[i][j] = cost(a_i, b_j)`.
pub fn ground_cost_matrix<T: Scalar>(
    a: &EmpiricalMeasure<T>,
    b: &EmpiricalMeasure<T>,
    cost: &CostSpec<T>,
) -> Result<Matrix<T>> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(Matrix::from_fn(a.len(), b.len(), |i, j| cost.eval(a.point(i), b.point(j))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_cost_is_zero() {
        let a = EmpiricalMeasure::uniform(vec![vec![0.0]]).unwrap();
        let c = ground_cost_matrix(&a, &a, &CostSpec::w1()).unwrap();
        assert_eq!(c.to_rows(), vec![vec![0.0]]);
    }

    #[test]
    fn one_d_unit_exponent() {
        let a = EmpiricalMeasure::uniform(vec![vec![0.0]]).unwrap();
        let b = EmpiricalMeasure::uniform(vec![vec![3.0]]).unwrap();
        let c = ground_cost_matrix(&a, &b, &CostSpec::w1()).unwrap();
        assert_eq!(c.to_rows(), vec![vec![3.0]]);
    }

    #[test]
    fn squared_euclidean_hand_values() {
        let a = EmpiricalMeasure::uniform(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let b = EmpiricalMeasure::uniform(vec![vec![0.0, 1.0]]).unwrap();
        let c = ground_cost_matrix(&a, &b, &CostSpec::<f64>::new(2.0).unwrap()).unwrap();
        assert!((c.get(0, 0) - 1.0).abs() < 1e-15);
        assert!((c.get(1, 0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_when_equal() {
        let a = EmpiricalMeasure::uniform(vec![vec![0.1, 0.7], vec![0.4, -0.2], vec![2.0, 1.0]]).unwrap();
        let c = ground_cost_matrix(&a, &a, &CostSpec::new(1.5).unwrap()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(c.get(i, j), c.get(j, i));
            }
        }
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let a = EmpiricalMeasure::uniform(vec![vec![0.0]]).unwrap();
        let b = EmpiricalMeasure::uniform(vec![vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            ground_cost_matrix(&a, &b, &CostSpec::w1()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn measure_validation() {
        assert!(EmpiricalMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.6]).is_err());
        assert!(EmpiricalMeasure::new(vec![vec![0.0], vec![1.0, 2.0]], vec![0.5, 0.5]).is_err());
        assert!(EmpiricalMeasure::new(vec![vec![0.0], vec![1.0]], vec![-0.5, 1.5]).is_err());
        assert!(EmpiricalMeasure::<f64>::new(vec![vec![]], vec![1.0]).is_err());
        assert!(EmpiricalMeasure::new(vec![vec![0.0f32], vec![1.0]], vec![0.25, 0.75]).is_ok());
        assert!(CostSpec::new(0.5).is_err());
    }
}
