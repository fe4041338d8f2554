//! Brute-force verification of the relaxed/constrained equivalence and of
//! the squared-error identity behind the supervised/unsupervised link.

mod ranking;
mod relaxed;

pub use ranking::{check_noisy_target_ranking, spearman, CandidateStats, RankingReport, CANDIDATES};
pub use relaxed::{
    argmin_tol, grid_instance, grid_shape, random_instance, solve_constrained, solve_relaxed,
    verify_lambdas, verify_equivalence, Argmin, MapTable, RelaxedInstance, EquivalenceVerdict,
    DEFAULT_BUDGET, MAX_SUPPORT,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub instances: usize,
    pub lambdas: Vec<f64>,
    pub max_n: usize,
    pub max_dim: usize,
    pub seed: u64,
    pub budget: u128,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            instances: 100,
            lambdas: vec![1.5, 2.0, 10.0],
            max_n: 4,
            max_dim: 2,
            seed: 0x0DE1_A5ED,
            budget: DEFAULT_BUDGET,
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.instances == 0 {
            return Err(Error::InvalidArgument("instance count must be positive".into()));
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(Error::InvalidArgument("lambda grid must be non-empty and nonnegative".into()));
        }
        if !(2..=MAX_SUPPORT).contains(&self.max_n) || self.max_dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "max_n must be in 2..={MAX_SUPPORT} and max_dim >= 1"
            )));
        }
        Ok(())
    }
}

/// One row of the verification table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyRow {
    pub instance: usize,
    pub n: usize,
    pub dim: usize,
    pub codomain_size: usize,
    pub lambda: f64,
    pub relaxed_min: f64,
    pub constrained_min: f64,
    pub w1_xy: f64,
    pub relaxed_argmin_count: usize,
    pub constrained_argmin_count: usize,
    pub off_target_minimizer: bool,
    pub holds: bool,
    /// `lambda > 1`: a failed verdict is a verification failure.
    pub equivalence_applies: bool,
}

impl VerifyRow {
    pub fn failed(&self) -> bool {
        self.equivalence_applies && !self.holds
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub rows: Vec<VerifyRow>,
    pub failures: usize,
    /// Rows where some relaxed minimizer misses the target distribution.
    pub off_target_rows: usize,
}

impl VerifyReport {
    pub fn all_hold(&self) -> bool {
        self.failures == 0
    }
}

/// Runs every (instance, lambda) pair of the grid, instances in parallel.
pub fn run_verification(config: &VerifyConfig) -> Result<VerifyReport> {
    config.validate()?;
    let per_instance: Vec<Vec<VerifyRow>> = (0..config.instances)
        .into_par_iter()
        .map(|idx| -> Result<Vec<VerifyRow>> {
            let inst = grid_instance(config.seed, idx, config.max_n, config.max_dim, config.budget)?;
            let verdicts = verify_lambdas(&inst, &config.lambdas, config.budget)?;
            Ok(verdicts
                .into_iter()
                .map(|v| VerifyRow {
                    instance: idx,
                    n: inst.n(),
                    dim: inst.source.dim(),
                    codomain_size: inst.codomain.len(),
                    lambda: v.lambda,
                    relaxed_min: v.relaxed_min,
                    constrained_min: v.constrained_min,
                    w1_xy: v.w1_xy,
                    relaxed_argmin_count: v.relaxed_argmin_set.len(),
                    constrained_argmin_count: v.constrained_argmin_set.len(),
                    off_target_minimizer: v.off_target_minimizer,
                    holds: v.holds,
                    equivalence_applies: v.equivalence_applies(),
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let rows: Vec<VerifyRow> = per_instance.into_iter().flatten().collect();
    let failures = rows.iter().filter(|r| r.failed()).count();
    let off_target_rows = rows.iter().filter(|r| r.off_target_minimizer).count();
    Ok(VerifyReport {
        config: config.clone(),
        rows,
        failures,
        off_target_rows,
    })
}
