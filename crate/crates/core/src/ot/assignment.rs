//! Monge problem on uniform equal-size supports, solved as a linear
//! assignment problem.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::measure::{ground_cost_matrix, CostSpec, EmpiricalMeasure, Matrix, TransportMap};

/// Shortest-augmenting-path Hungarian algorithm. Returns `assignment[row] = col`
/// minimizing the summed cost of a square matrix.
pub fn hungarian<T: Scalar>(cost: &Matrix<T>) -> Vec<usize> {
    hungarian_with_potentials(cost).0
}

/// Hungarian assignment with its dual potentials: `u_i + v_j <= C_ij`
/// everywhere, with equality on assigned cells.
pub fn hungarian_with_potentials<T: Scalar>(cost: &Matrix<T>) -> (Vec<usize>, Vec<T>, Vec<T>) {
    let n = cost.rows();
    debug_assert_eq!(n, cost.cols());
    if n == 0 {
        return (Vec::new(), Vec::new(), Vec::new());
    }
    let inf = T::infinity();
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    (assignment, u[1..].to_vec(), v[1..].to_vec())
}

fn assignment_cost<T: Scalar>(cost: &Matrix<T>, assignment: &[usize]) -> T {
    assignment.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum()
}

/// Tolerance under which two assignment costs count as tied.
pub(crate) fn tie_tol<T: Scalar>(scale: T) -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(1e3)) * (T::one() + scale.abs())
}

/// Lexicographically smallest permutation among the minimum-cost ones.
///
/// Row by row, each column is tried in increasing order and kept if the
/// remaining rows can still be completed at the optimal total. O(n^5).
pub fn lexicographic_min_assignment<T: Scalar>(cost: &Matrix<T>) -> (Vec<usize>, T) {
    let n = cost.rows();
    let best = assignment_cost(cost, &hungarian(cost));
    let tol = tie_tol(best);
    let mut fixed: Vec<usize> = Vec::with_capacity(n);
    let mut used = vec![false; n];
    let mut spent = T::zero();
    for row in 0..n {
        let mut chosen = None;
        for col in 0..n {
            if used[col] {
                continue;
            }
            let rest_rows: Vec<usize> = (row + 1..n).collect();
            let rest_cols: Vec<usize> = (0..n).filter(|&c| !used[c] && c != col).collect();
            let sub = Matrix::from_fn(rest_rows.len(), rest_cols.len(), |a, b| {
                cost.get(rest_rows[a], rest_cols[b])
            });
            let rest = assignment_cost(&sub, &hungarian(&sub));
            if spent + cost.get(row, col) + rest <= best + tol {
                chosen = Some(col);
                break;
            }
        }
        // The column the optimum uses always passes, so `chosen` is set.
        let col = chosen.expect("optimal completion exists");
        used[col] = true;
        spent += cost.get(row, col);
        fixed.push(col);
    }
    let total = assignment_cost(cost, &fixed);
    (fixed, total)
}

/// Optimal transport map between two uniform measures of equal size.
/// Returns the lexicographically smallest optimal permutation and the mean
/// cost `(1/n) sum_i c(a_i, b_sigma(i))`.
pub fn monge_assignment<T: Scalar>(
    a: &EmpiricalMeasure<T>,
    b: &EmpiricalMeasure<T>,
    cost: &CostSpec<T>,
) -> Result<(TransportMap, T)> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "monge assignment needs equal support sizes, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if !a.is_uniform() || !b.is_uniform() {
        return Err(Error::InvalidArgument(
            "monge assignment needs uniform weights on both sides".into(),
        ));
    }
    let c = ground_cost_matrix(a, b, cost)?;
    let (assignment, total) = lexicographic_min_assignment(&c);
    let value = total / T::from_usize_lossy(a.len());
    Ok((TransportMap { assignment }, value))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1(points: &[f64]) -> EmpiricalMeasure<f64> {
        EmpiricalMeasure::uniform(points.iter().map(|p| vec![*p]).collect()).unwrap()
    }

    #[test]
    fn identity_for_equal_measures() {
        let a = m1(&[3.0, -1.0, 0.5]);
        let (map, v) = monge_assignment(&a, &a, &CostSpec::w1()).unwrap();
        assert_eq!(map, TransportMap::identity(3));
        assert_eq!(v, 0.0);
    }

    #[test]
    fn crossing_instance() {
        // sigma=(0,1): (11 + 9)/2 = 10; sigma=(1,0): (1 + 1)/2 = 1.
        let (map, v) = monge_assignment(&m1(&[0.0, 10.0]), &m1(&[11.0, 1.0]), &CostSpec::w1()).unwrap();
        assert_eq!(map.assignment, vec![1, 0]);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lexicographic_tie_break() {
        // Every permutation costs the same.
        let c = Matrix::from_fn(4, 4, |_, _| 1.0);
        let (a, total) = lexicographic_min_assignment(&c);
        assert_eq!(a, vec![0, 1, 2, 3]);
        assert_eq!(total, 4.0);
        // In 1-D with W1 cost, {0,1} -> {2,3} is tied in both orders.
        let (map, _) = monge_assignment(&m1(&[0.0, 1.0]), &m1(&[2.0, 3.0]), &CostSpec::w1()).unwrap();
        assert_eq!(map.assignment, vec![0, 1]);
        let (map, _) = monge_assignment(&m1(&[1.0, 0.0]), &m1(&[2.0, 3.0]), &CostSpec::w1()).unwrap();
        assert_eq!(map.assignment, vec![0, 1]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(monge_assignment(&m1(&[0.0]), &m1(&[0.0, 1.0]), &CostSpec::w1()).is_err());
        let w = EmpiricalMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.25, 0.75]).unwrap();
        assert!(monge_assignment(&w, &m1(&[0.0, 1.0]), &CostSpec::w1()).is_err());
    }
}
