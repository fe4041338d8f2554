//! Discrete optimal transport between empirical measures.
//!
//! | Function | Problem | Exactness |
//! |----------|---------|-----------|
//! | [`kantorovich_lp`] | general weighted supports | exact (transportation simplex; assignment for uniform equal-size supports) |
//! | [`monge_assignment`] | uniform, equal-size supports | exact, lexicographically smallest optimal permutation |
//! | [`w1_1d`] | 1-D supports, unit exponent | exact, O((n + m) log(n + m)) |
//! | [`sinkhorn`] | entropic approximation | within the marginal tolerance |
//!
//! All solvers are pure and deterministic.

mod assignment;
mod lp;
mod measure;
mod one_d;
mod sinkhorn;

pub use assignment::{hungarian, hungarian_with_potentials, lexicographic_min_assignment, monge_assignment};
pub use lp::{kantorovich_lp, kantorovich_lp_full, solve_transport, LpSolution};
pub use measure::{
    euclidean, ground_cost_matrix, CostSpec, Coupling, EmpiricalMeasure, Matrix, TransportMap,
};
pub use one_d::w1_1d;
pub use sinkhorn::{sinkhorn, sinkhorn_matrix, SinkhornParams};
