use otdenoise::ot::{
    ground_cost_matrix, kantorovich_lp, kantorovich_lp_full, monge_assignment, sinkhorn, solve_transport, w1_1d,
    CostSpec, EmpiricalMeasure, SinkhornParams,
};
use otdenoise::rng::rng_from_seed;
use proptest::prelude::*;
use rand::Rng;

fn random_measure(rng: &mut impl Rng, n: usize, d: usize, uniform: bool) -> EmpiricalMeasure<f64> {
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    if uniform {
        return EmpiricalMeasure::uniform(points).unwrap();
    }
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let rest: f64 = w[..n - 1].iter().sum();
    w[n - 1] = 1.0 - rest;
    EmpiricalMeasure::new(points, w).unwrap()
}

fn random_sized(rng: &mut impl Rng, max: usize, d: usize, uniform: bool) -> EmpiricalMeasure<f64> {
    let n = rng.random_range(1..=max);
    random_measure(rng, n, d, uniform)
}

/// Minimum mean cost over all permutations, by enumeration.
fn brute_force_assignment(a: &EmpiricalMeasure<f64>, b: &EmpiricalMeasure<f64>, cost: &CostSpec<f64>) -> f64 {
    let c = ground_cost_matrix(a, b, cost).unwrap();
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let v: f64 = p.iter().enumerate().map(|(i, &j)| c.get(i, j)).sum();
        best = best.min(v);
    });
    best / n as f64
}

fn permute(p: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}

#[test]
fn metric_axioms_on_random_instances() {
    let mut rng = rng_from_seed(0xA11CE);
    let w1 = CostSpec::w1();
    for _ in 0..200 {
        let d = rng.random_range(1..=3);
        let a = random_sized(&mut rng, 8, d, false);
        let b = random_sized(&mut rng, 8, d, false);
        let c = random_sized(&mut rng, 8, d, false);
        let (_, ab) = kantorovich_lp(&a, &b, &w1).unwrap();
        let (_, ba) = kantorovich_lp(&b, &a, &w1).unwrap();
        let (_, bc) = kantorovich_lp(&b, &c, &w1).unwrap();
        let (_, ac) = kantorovich_lp(&a, &c, &w1).unwrap();
        let (_, aa) = kantorovich_lp(&a, &a, &w1).unwrap();
        assert!((ab - ba).abs() <= 1e-9, "symmetry {ab} {ba}");
        assert!(ac <= ab + bc + 1e-9, "triangle {ac} > {ab} + {bc}");
        assert!(aa.abs() <= 1e-9);
    }
}

#[test]
fn lp_optimality_certificate() {
    // Primal feasibility + dual feasibility + zero duality gap proves optimality
    // without trusting the pivoting logic.
    let mut rng = rng_from_seed(42);
    for _ in 0..200 {
        let d = rng.random_range(1..=3);
        let a = random_sized(&mut rng, 9, d, false);
        let b = random_sized(&mut rng, 9, d, false);
        let cost = CostSpec::new(rng.random_range(1.0..2.5)).unwrap();
        let sol = kantorovich_lp_full(&a, &b, &cost).unwrap();
        let c = ground_cost_matrix(&a, &b, &cost).unwrap();
        assert!(sol.coupling.marginal_error(&a, &b) <= 1e-9);
        assert!(sol.coupling.min_entry() >= 0.0);
        for i in 0..a.len() {
            for j in 0..b.len() {
                assert!(sol.row_potentials[i] + sol.col_potentials[j] <= c.get(i, j) + 1e-9);
            }
        }
        let dual: f64 = sol.row_potentials.iter().zip(a.weights()).map(|(u, w)| u * w).sum::<f64>()
            + sol.col_potentials.iter().zip(b.weights()).map(|(v, w)| v * w).sum::<f64>();
        assert!((dual - sol.value).abs() <= 1e-9, "gap {}", sol.value - dual);
    }
}

#[test]
fn larger_lp_stays_feasible() {
    let mut rng = rng_from_seed(3);
    let a = random_measure(&mut rng, 120, 16, true);
    let b = random_measure(&mut rng, 90, 16, false);
    let sol = kantorovich_lp_full(&a, &b, &CostSpec::w1()).unwrap();
    assert!(sol.coupling.marginal_error(&a, &b) <= 1e-9);
    let c = ground_cost_matrix(&a, &b, &CostSpec::w1()).unwrap();
    for i in 0..a.len() {
        for j in 0..b.len() {
            assert!(sol.row_potentials[i] + sol.col_potentials[j] <= c.get(i, j) + 1e-9);
        }
    }
}

#[test]
fn one_d_fast_path_matches_lp() {
    let mut rng = rng_from_seed(7);
    for _ in 0..200 {
        let a = random_sized(&mut rng, 10, 1, false);
        let b = random_sized(&mut rng, 10, 1, false);
        let (_, lp) = kantorovich_lp(&a, &b, &CostSpec::w1()).unwrap();
        let fast = w1_1d(&a, &b).unwrap();
        assert!((lp - fast).abs() <= 1e-9, "{lp} vs {fast}");
    }
}

#[test]
fn monge_matches_lp_and_enumeration() {
    let mut rng = rng_from_seed(11);
    for _ in 0..100 {
        let n = rng.random_range(1..=6);
        let d = rng.random_range(1..=3);
        let a = random_measure(&mut rng, n, d, true);
        let b = random_measure(&mut rng, n, d, true);
        let cost = if rng.random_bool(0.5) { CostSpec::w1() } else { CostSpec::new(2.0).unwrap() };
        let (map, v) = monge_assignment(&a, &b, &cost).unwrap();
        assert!(map.is_permutation());
        let (_, lp) = kantorovich_lp(&a, &b, &cost).unwrap();
        assert!((v - lp).abs() <= 1e-9, "{v} vs {lp}");
        assert!((v - brute_force_assignment(&a, &b, &cost)).abs() <= 1e-12);
        // The transportation simplex on the same instance, bypassing the
        // assignment shortcut that uniform square inputs take.
        let c = ground_cost_matrix(&a, &b, &cost).unwrap();
        let simplex = solve_transport(a.weights(), b.weights(), &c).unwrap();
        assert!((simplex.value - lp).abs() <= 1e-9);
    }
}

#[test]
fn monge_random_n6_d2() {
    let mut rng = rng_from_seed(6);
    let a = random_measure(&mut rng, 6, 2, true);
    let b = random_measure(&mut rng, 6, 2, true);
    let (_, v) = monge_assignment(&a, &b, &CostSpec::w1()).unwrap();
    let (_, lp) = kantorovich_lp(&a, &b, &CostSpec::w1()).unwrap();
    assert!((v - lp).abs() <= 1e-9);
    let c = ground_cost_matrix(&a, &b, &CostSpec::w1()).unwrap();
    assert!((solve_transport(a.weights(), b.weights(), &c).unwrap().value - lp).abs() <= 1e-9);
}

#[test]
fn assignment_shortcut_matches_simplex_on_batches() {
    let mut rng = rng_from_seed(21);
    for n in [8, 16, 32, 64] {
        let a = random_measure(&mut rng, n, 16, true);
        let b = random_measure(&mut rng, n, 16, true);
        let sol = kantorovich_lp_full(&a, &b, &CostSpec::w1()).unwrap();
        let c = ground_cost_matrix(&a, &b, &CostSpec::w1()).unwrap();
        let simplex = solve_transport(a.weights(), b.weights(), &c).unwrap();
        assert!((sol.value - simplex.value).abs() <= 1e-9);
        assert!(sol.coupling.marginal_error(&a, &b) <= 1e-12);
        for i in 0..n {
            for j in 0..n {
                assert!(sol.row_potentials[i] + sol.col_potentials[j] <= c.get(i, j) + 1e-9);
            }
        }
    }
}

#[test]
fn sinkhorn_self_transport_bounded_by_entropy() {
    let mut rng = rng_from_seed(13);
    for eps in [1.0, 0.1, 0.01] {
        let a = random_measure(&mut rng, 6, 2, true);
        let (plan, v) = sinkhorn(&a, &a, &CostSpec::w1(), &SinkhornParams::new(eps)).unwrap();
        assert!(v >= 0.0);
        assert!(v <= eps * (6f64).ln() + 1e-6, "eps {eps}: {v}");
        assert!(plan.marginal_error(&a, &a) <= 1e-9);
    }
}

#[test]
fn sinkhorn_small_epsilon_close_to_lp() {
    let mut rng = rng_from_seed(17);
    for _ in 0..50 {
        let d = rng.random_range(1..=3);
        let a = random_sized(&mut rng, 8, d, false);
        let b = random_sized(&mut rng, 8, d, false);
        let (_, lp) = kantorovich_lp(&a, &b, &CostSpec::w1()).unwrap();
        let (plan, v) = sinkhorn(&a, &b, &CostSpec::w1(), &SinkhornParams::new(1e-3)).unwrap();
        assert!((v - lp).abs() <= 1e-2, "{v} vs {lp}");
        assert!(plan.marginal_error(&a, &b) <= 1e-9);
    }
}

#[test]
fn sinkhorn_gap_shrinks_with_epsilon() {
    let mut rng = rng_from_seed(19);
    let a = random_measure(&mut rng, 7, 2, false);
    let b = random_measure(&mut rng, 5, 2, false);
    let (_, lp) = kantorovich_lp(&a, &b, &CostSpec::w1()).unwrap();
    let mut prev = f64::INFINITY;
    let mut eps = 0.5;
    while eps > 1e-3 {
        let (_, v) = sinkhorn(&a, &b, &CostSpec::w1(), &SinkhornParams::new(eps)).unwrap();
        let gap = (v - lp).abs();
        assert!(gap <= prev + 1e-9, "eps {eps}: gap {gap} > {prev}");
        prev = gap;
        eps *= 0.5;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_value_invariant_under_point_order(seed in any::<u64>(), n in 1usize..7, m in 1usize..7) {
        let mut rng = rng_from_seed(seed);
        let a = random_measure(&mut rng, n, 2, false);
        let b = random_measure(&mut rng, m, 2, false);
        let (_, v) = kantorovich_lp(&a, &b, &CostSpec::w1()).unwrap();
        let rev_pts: Vec<Vec<f64>> = (0..a.len()).rev().map(|i| a.point(i).to_vec()).collect();
        let rev_w: Vec<f64> = a.weights().iter().rev().copied().collect();
        let ar = EmpiricalMeasure::new(rev_pts, rev_w).unwrap();
        let (_, vr) = kantorovich_lp(&ar, &b, &CostSpec::w1()).unwrap();
        prop_assert!((v - vr).abs() <= 1e-9);
    }

    #[test]
    fn w1_of_translation_is_shift_norm(seed in any::<u64>(), n in 1usize..8, shift in -3.0f64..3.0) {
        let mut rng = rng_from_seed(seed);
        let a = random_measure(&mut rng, n, 1, false);
        let moved: Vec<Vec<f64>> = a.points().map(|p| vec![p[0] + shift]).collect();
        let b = EmpiricalMeasure::new(moved, a.weights().to_vec()).unwrap();
        let (_, v) = kantorovich_lp(&a, &b, &CostSpec::w1()).unwrap();
        prop_assert!((v - shift.abs()).abs() <= 1e-9);
    }
}
