//! Exhaustive comparison of the constrained transport problem (maps whose
//! pushforward equals the target) with its penalized relaxation
//! `fidelity + lambda * W1(target, pushforward)` on tiny discrete instances.

use std::collections::{BTreeSet, HashMap};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ot::{euclidean, kantorovich_lp, CostSpec, EmpiricalMeasure, TransportMap};
use crate::rng::{derive_seed, rng_from_seed};
use crate::scalar::Scalar;

/// Largest support size accepted by the enumerators.
pub const MAX_SUPPORT: usize = 6;
/// Default cap on `|codomain|^n`.
pub const DEFAULT_BUDGET: u128 = 50_000;

/// Objective values within this distance of the minimum count as minimizers.
pub fn argmin_tol<T: Scalar>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(1e3))
}

/// Source (noisy) and target (clean) uniform measures of equal size, a
/// penalty weight and the finite set of points a map may output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelaxedInstance<T> {
    pub source: EmpiricalMeasure<T>,
    pub target: EmpiricalMeasure<T>,
    pub lambda: T,
    /// Distinct candidate outputs. Every target point appears here.
    pub codomain: Vec<Vec<T>>,
    /// `target_index[k]` is the codomain index of target point `k`.
    target_index: Vec<usize>,
}

fn same_point<T: Scalar>(a: &[T], b: &[T]) -> bool {
    a.iter().zip(b).all(|(x, y)| x == y)
}

fn push_unique<T: Scalar>(set: &mut Vec<Vec<T>>, p: &[T]) -> usize {
    if let Some(i) = set.iter().position(|q| same_point(q, p)) {
        return i;
    }
    set.push(p.to_vec());
    set.len() - 1
}

fn pow_u128(base: usize, exp: usize) -> u128 {
    (0..exp).fold(1u128, |acc, _| acc.saturating_mul(base as u128))
}

impl<T: Scalar> RelaxedInstance<T> {
    /// Builds the default codomain: target support, then source support, then
    /// midpoints `(y_i + x_j) / 2` in row-major order while `|codomain|^n`
    /// stays within `budget`.
    pub fn new(
        source: EmpiricalMeasure<T>,
        target: EmpiricalMeasure<T>,
        lambda: T,
        budget: u128,
    ) -> Result<Self> {
        Self::check_measures(&source, &target, lambda)?;
        let n = source.len();
        let mut codomain = Vec::new();
        for p in target.points() {
            push_unique(&mut codomain, p);
        }
        for p in source.points() {
            if pow_u128(codomain.len() + 1, n) > budget {
                break;
            }
            push_unique(&mut codomain, p);
        }
        'mid: for y in source.points() {
            for x in target.points() {
                if pow_u128(codomain.len() + 1, n) > budget {
                    break 'mid;
                }
                let mid: Vec<T> = y.iter().zip(x).map(|(a, b)| (*a + *b) * T::lit(0.5)).collect();
                push_unique(&mut codomain, &mid);
            }
        }
        Self::with_codomain(source, target, lambda, codomain)
    }

    /// Uses an explicit codomain, which must contain every target point.
    pub fn with_codomain(
        source: EmpiricalMeasure<T>,
        target: EmpiricalMeasure<T>,
        lambda: T,
        codomain: Vec<Vec<T>>,
    ) -> Result<Self> {
        Self::check_measures(&source, &target, lambda)?;
        if codomain.iter().any(|p| p.len() != target.dim()) {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                found: codomain.iter().map(Vec::len).find(|&d| d != target.dim()).unwrap_or(0),
            });
        }
        let mut distinct: Vec<Vec<T>> = Vec::new();
        for p in &codomain {
            push_unique(&mut distinct, p);
        }
        let target_index = target
            .points()
            .map(|x| {
                distinct
                    .iter()
                    .position(|c| same_point(c, x))
                    .ok_or_else(|| Error::InvalidArgument("codomain must contain every target point".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            source,
            target,
            lambda,
            codomain: distinct,
            target_index,
        })
    }

    fn check_measures(source: &EmpiricalMeasure<T>, target: &EmpiricalMeasure<T>, lambda: T) -> Result<()> {
        if source.len() != target.len() {
            return Err(Error::InvalidArgument(format!(
                "source and target sizes differ ({} vs {})",
                source.len(),
                target.len()
            )));
        }
        if source.len() > MAX_SUPPORT {
            return Err(Error::InvalidArgument(format!(
                "support size {} exceeds {MAX_SUPPORT}",
                source.len()
            )));
        }
        if source.dim() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: source.dim(),
                found: target.dim(),
            });
        }
        if !source.is_uniform() || !target.is_uniform() {
            return Err(Error::InvalidArgument("instance measures must be uniform".into()));
        }
        if !(lambda >= T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.source.len()
    }

    pub fn with_lambda(&self, lambda: T) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    /// Codomain indices of the target support, sorted: the image multiset a
    /// map must have for its pushforward to equal the target measure.
    pub fn target_multiset(&self) -> Vec<usize> {
        let mut t = self.target_index.clone();
        t.sort_unstable();
        t
    }

    pub fn pushes_onto_target(&self, map: &TransportMap) -> bool {
        let mut img = map.assignment.clone();
        img.sort_unstable();
        img == self.target_multiset()
    }

    /// Maps mean `(1/n) sum_i ||y_i - codomain[g(i)]||`.
    pub fn fidelity(&self, map: &TransportMap) -> T {
        let n = self.n();
        map.assignment
            .iter()
            .enumerate()
            .map(|(i, &k)| euclidean(self.source.point(i), &self.codomain[k]))
            .sum::<T>()
            / T::from_usize_lossy(n)
    }

    /// Pushforward of the uniform source measure through `map`.
    pub fn pushforward(&self, map: &TransportMap) -> Result<EmpiricalMeasure<T>> {
        pushforward_of_multiset(&self.codomain, &sorted(&map.assignment), self.n())
    }
}

fn sorted(v: &[usize]) -> Vec<usize> {
    let mut s = v.to_vec();
    s.sort_unstable();
    s
}

fn pushforward_of_multiset<T: Scalar>(codomain: &[Vec<T>], multiset: &[usize], n: usize) -> Result<EmpiricalMeasure<T>> {
    let unit = T::one() / T::from_usize_lossy(n);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (pos, &k) in multiset.iter().enumerate() {
        if pos > 0 && multiset[pos - 1] == k {
            *weights.last_mut().expect("non-empty") += unit;
        } else {
            points.push(codomain[k].clone());
            weights.push(unit);
        }
    }
    EmpiricalMeasure::new(points, weights)
}

/// Minimum value and every minimizing map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Argmin<T> {
    pub value: T,
    pub maps: BTreeSet<TransportMap>,
}

/// Minimizes the mean fidelity over permutations onto the target support.
pub fn solve_constrained<T: Scalar>(inst: &RelaxedInstance<T>) -> Result<Argmin<T>> {
    let n = inst.n();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut all: Vec<(T, TransportMap)> = Vec::new();
    permutations(&mut perm, 0, &mut |p| {
        let map = TransportMap {
            assignment: p.iter().map(|&j| inst.target_index[j]).collect(),
        };
        all.push((inst.fidelity(&map), map));
    });
    Ok(collect_argmin(all))
}

fn permutations(p: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permutations(p, k + 1, visit);
        p.swap(k, i);
    }
}

fn collect_argmin<T: Scalar>(all: Vec<(T, TransportMap)>) -> Argmin<T> {
    let best = all.iter().fold(T::infinity(), |m, (v, _)| m.min(*v));
    let tol = argmin_tol::<T>();
    let maps = all
        .into_iter()
        .filter(|(v, _)| *v <= best + tol)
        .map(|(_, m)| m)
        .collect();
    Argmin { value: best, maps }
}

/// Fidelity and pushforward distance of every map `source -> codomain`,
/// independent of `lambda`, so several penalty weights can share one pass.
#[derive(Debug, Clone)]
pub struct MapTable<T> {
    n: usize,
    base: usize,
    fidelity: Vec<T>,
    w1: Vec<T>,
}

impl<T: Scalar> MapTable<T> {
    pub fn build(inst: &RelaxedInstance<T>, budget: u128) -> Result<Self> {
        let n = inst.n();
        let base = inst.codomain.len();
        let total = pow_u128(base, n);
        if total > budget {
            return Err(Error::BudgetExceeded { required: total, budget });
        }
        let total = total as usize;
        let dist: Vec<Vec<T>> = (0..n)
            .map(|i| inst.codomain.iter().map(|c| euclidean(inst.source.point(i), c)).collect())
            .collect();
        let inv_n = T::one() / T::from_usize_lossy(n);
        let w1_cost = CostSpec::w1();
        let mut cache: HashMap<Vec<usize>, T> = HashMap::new();
        let mut fidelity = Vec::with_capacity(total);
        let mut w1 = Vec::with_capacity(total);
        let mut digits = vec![0usize; n];
        for _ in 0..total {
            let fid = digits.iter().enumerate().map(|(i, &k)| dist[i][k]).sum::<T>() * inv_n;
            let key = sorted(&digits);
            let d = match cache.get(&key) {
                Some(v) => *v,
                None => {
                    let push = pushforward_of_multiset(&inst.codomain, &key, n)?;
                    let (_, v) = kantorovich_lp(&inst.target, &push, &w1_cost)?;
                    cache.insert(key, v);
                    v
                }
            };
            fidelity.push(fid);
            w1.push(d);
            // odometer, least significant digit first
            for digit in digits.iter_mut() {
                *digit += 1;
                if *digit < base {
                    break;
                }
                *digit = 0;
            }
        }
        Ok(Self { n, base, fidelity, w1 })
    }

    pub fn len(&self) -> usize {
        self.fidelity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fidelity.is_empty()
    }

    fn decode(&self, mut idx: usize) -> TransportMap {
        let mut assignment = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            assignment.push(idx % self.base);
            idx /= self.base;
        }
        TransportMap { assignment }
    }

    pub fn argmin(&self, lambda: T) -> Argmin<T> {
        let objective = |k: usize| self.fidelity[k] + lambda * self.w1[k];
        let best = (0..self.len()).fold(T::infinity(), |m, k| m.min(objective(k)));
        let tol = argmin_tol::<T>();
        let maps = (0..self.len())
            .filter(|&k| objective(k) <= best + tol)
            .map(|k| self.decode(k))
            .collect();
        Argmin { value: best, maps }
    }
}

/// Exhaustively minimizes `fidelity + lambda * W1(target, pushforward)` over
/// all maps into the codomain.
pub fn solve_relaxed<T: Scalar>(inst: &RelaxedInstance<T>, budget: u128) -> Result<Argmin<T>> {
    Ok(MapTable::build(inst, budget)?.argmin(inst.lambda))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceVerdict<T> {
    pub lambda: T,
    pub relaxed_min: T,
    pub constrained_min: T,
    pub w1_xy: T,
    pub relaxed_argmin_set: BTreeSet<TransportMap>,
    pub constrained_argmin_set: BTreeSet<TransportMap>,
    /// Some relaxed minimizer has a pushforward different from the target.
    pub off_target_minimizer: bool,
    /// `|relaxed_min - w1_xy| <= tol` and the two argmin sets coincide.
    pub holds: bool,
}

impl<T: Scalar> EquivalenceVerdict<T> {
    /// The equivalence is only claimed for penalty weights above 1.
    pub fn equivalence_applies(&self) -> bool {
        self.lambda > T::one()
    }

    pub fn min_matches_w1(&self) -> bool {
        (self.relaxed_min - self.w1_xy).abs() <= argmin_tol::<T>()
    }

    pub fn sets_equal(&self) -> bool {
        self.relaxed_argmin_set == self.constrained_argmin_set
    }
}

fn verdict<T: Scalar>(inst: &RelaxedInstance<T>, relaxed: Argmin<T>, constrained: &Argmin<T>, w1_xy: T) -> EquivalenceVerdict<T> {
    let off_target_minimizer = relaxed.maps.iter().any(|m| !inst.pushes_onto_target(m));
    let holds = (relaxed.value - w1_xy).abs() <= argmin_tol::<T>() && relaxed.maps == constrained.maps;
    EquivalenceVerdict {
        lambda: inst.lambda,
        relaxed_min: relaxed.value,
        constrained_min: constrained.value,
        w1_xy,
        relaxed_argmin_set: relaxed.maps,
        constrained_argmin_set: constrained.maps.clone(),
        off_target_minimizer,
        holds,
    }
}

/// Compares the relaxed and constrained problems on one instance.
pub fn verify_equivalence<T: Scalar>(inst: &RelaxedInstance<T>, budget: u128) -> Result<EquivalenceVerdict<T>> {
    Ok(verify_lambdas(inst, &[inst.lambda], budget)?.remove(0))
}

/// One verdict per penalty weight, sharing the enumeration.
pub fn verify_lambdas<T: Scalar>(inst: &RelaxedInstance<T>, lambdas: &[T], budget: u128) -> Result<Vec<EquivalenceVerdict<T>>> {
    let table = MapTable::build(inst, budget)?;
    let constrained = solve_constrained(inst)?;
    let (_, w1_xy) = kantorovich_lp(&inst.target, &inst.source, &CostSpec::w1())?;
    Ok(lambdas
        .iter()
        .map(|&l| {
            let relaxed = table.argmin(l);
            verdict(&inst.with_lambda(l), relaxed, &constrained, w1_xy)
        })
        .collect())
}

/// Uniform random instance with points in the unit cube.
pub fn random_instance(seed: u64, n: usize, dim: usize, lambda: f64, budget: u128) -> Result<RelaxedInstance<f64>> {
    let mut rng = rng_from_seed(seed);
    let mut draw = || -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect()
    };
    let source = EmpiricalMeasure::uniform(draw())?;
    let target = EmpiricalMeasure::uniform(draw())?;
    RelaxedInstance::new(source, target, lambda, budget)
}

/// Shape of the `index`-th grid instance: sizes cycle through 2..=max_n and
/// dimensions through 1..=max_dim.
pub fn grid_shape(index: usize, max_n: usize, max_dim: usize) -> (usize, usize) {
    let sizes = max_n.saturating_sub(1).max(1);
    let n = 2 + index % sizes;
    let dim = 1 + (index / sizes) % max_dim.max(1);
    (n.min(max_n.max(2)), dim)
}

pub fn grid_instance(seed: u64, index: usize, max_n: usize, max_dim: usize, budget: u128) -> Result<RelaxedInstance<f64>> {
    let (n, dim) = grid_shape(index, max_n, max_dim);
    random_instance(derive_seed(seed, index as u64), n, dim, 2.0, budget)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1(points: &[f64]) -> EmpiricalMeasure<f64> {
        EmpiricalMeasure::uniform(points.iter().map(|p| vec![*p]).collect()).unwrap()
    }

    fn two_point(lambda: f64) -> RelaxedInstance<f64> {
        RelaxedInstance::new(m1(&[0.0, 2.0]), m1(&[1.0, 3.0]), lambda, DEFAULT_BUDGET).unwrap()
    }

    fn map_to(inst: &RelaxedInstance<f64>, values: &[f64]) -> TransportMap {
        TransportMap {
            assignment: values
                .iter()
                .map(|v| inst.codomain.iter().position(|c| c[0] == *v).unwrap())
                .collect(),
        }
    }

    #[test]
    fn codomain_contains_target_then_source() {
        let inst = two_point(2.0);
        assert_eq!(&inst.codomain[..4], &[vec![1.0], vec![3.0], vec![0.0], vec![2.0]]);
        assert!(inst.codomain.contains(&vec![0.5]));
        assert!(inst.codomain.contains(&vec![1.5]));
        assert!(inst.codomain.contains(&vec![2.5]));
    }

    #[test]
    fn constrained_sorted_matching() {
        let inst = two_point(2.0);
        let c = solve_constrained(&inst).unwrap();
        assert!((c.value - 1.0).abs() < 1e-12);
        assert_eq!(c.maps.len(), 1);
        assert!(c.maps.contains(&map_to(&inst, &[1.0, 3.0])));
    }

    #[test]
    fn constrained_identity_when_equal() {
        let inst = RelaxedInstance::new(m1(&[0.3, 0.9]), m1(&[0.3, 0.9]), 2.0, DEFAULT_BUDGET).unwrap();
        let c = solve_constrained(&inst).unwrap();
        assert_eq!(c.value, 0.0);
        assert!(c.maps.contains(&map_to(&inst, &[0.3, 0.9])));
    }

    #[test]
    fn relaxed_two_point_lambda_two() {
        let inst = two_point(2.0);
        let r = solve_relaxed(&inst, DEFAULT_BUDGET).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert_eq!(r.maps.len(), 1);
        assert!(r.maps.contains(&map_to(&inst, &[1.0, 3.0])));
        // Also with only the target support as codomain.
        let small = RelaxedInstance::with_codomain(m1(&[0.0, 2.0]), m1(&[1.0, 3.0]), 2.0, vec![vec![1.0], vec![3.0]]).unwrap();
        let r = solve_relaxed(&small, DEFAULT_BUDGET).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert_eq!(r.maps.len(), 1);
    }

    #[test]
    fn relaxed_lambda_zero_keeps_identity() {
        let inst = two_point(0.0);
        let r = solve_relaxed(&inst, DEFAULT_BUDGET).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.maps.contains(&map_to(&inst, &[0.0, 2.0])));
    }

    #[test]
    fn small_lambda_breaks_equivalence() {
        let inst = two_point(0.25);
        let r = solve_relaxed(&inst, DEFAULT_BUDGET).unwrap();
        assert!(r.value < 1.0);
        assert!(r.maps.iter().all(|m| !inst.pushes_onto_target(m)));
        let v = verify_equivalence(&inst, DEFAULT_BUDGET).unwrap();
        assert!(!v.holds);
        assert!(v.off_target_minimizer);
    }

    #[test]
    fn lambda_one_attains_w1_with_larger_set() {
        let inst = two_point(1.0);
        let v = verify_equivalence(&inst, DEFAULT_BUDGET).unwrap();
        assert!(v.min_matches_w1());
        assert!(v.relaxed_argmin_set.is_superset(&v.constrained_argmin_set));
        // Identity attains W1 at lambda = 1: fidelity 0 + W1(target, source).
        assert!(v.relaxed_argmin_set.contains(&map_to(&inst, &[0.0, 2.0])));
        assert!(!v.holds);
    }

    #[test]
    fn degenerate_equal_measures() {
        let inst = RelaxedInstance::new(m1(&[0.1, 0.4, 0.8]), m1(&[0.1, 0.4, 0.8]), 1.5, DEFAULT_BUDGET).unwrap();
        let v = verify_equivalence(&inst, DEFAULT_BUDGET).unwrap();
        assert!(v.holds);
        assert_eq!(v.relaxed_min, 0.0);
        assert!(v.relaxed_argmin_set.contains(&map_to(&inst, &[0.1, 0.4, 0.8])));
    }

    #[test]
    fn random_n4_constrained_equals_lp() {
        let inst = random_instance(99, 4, 2, 2.0, DEFAULT_BUDGET).unwrap();
        let c = solve_constrained(&inst).unwrap();
        let (_, lp) = kantorovich_lp(&inst.target, &inst.source, &CostSpec::w1()).unwrap();
        assert!((c.value - lp).abs() <= 1e-9);
    }

    #[test]
    fn budget_is_enforced() {
        let inst = random_instance(1, 4, 2, 2.0, DEFAULT_BUDGET).unwrap();
        assert!(inst.codomain.len().pow(4) as u128 <= DEFAULT_BUDGET);
        assert!(matches!(solve_relaxed(&inst, 100), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn rejects_invalid_instances() {
        assert!(RelaxedInstance::new(m1(&[0.0]), m1(&[0.0, 1.0]), 2.0, DEFAULT_BUDGET).is_err());
        let pts: Vec<f64> = (0..7).map(f64::from).collect();
        assert!(RelaxedInstance::new(m1(&pts), m1(&pts), 2.0, DEFAULT_BUDGET).is_err());
        assert!(RelaxedInstance::with_codomain(m1(&[0.0]), m1(&[1.0]), 2.0, vec![vec![0.0]]).is_err());
    }
}
