//! Monte-Carlo check that, for reconstructions distributed like the clean
//! signal and independent of the noise, the unsupervised squared error to
//! the noisy input and the supervised squared error to the clean signal
//! differ only by a constant, so they rank candidates identically.

use std::f64::consts::FRAC_PI_8;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Number of candidate reconstructions, mixing angles `k * pi/8`, `k = 0..5`.
pub const CANDIDATES: usize = 5;

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn std_error(&self) -> f64 {
        if self.n < 2.0 {
            return f64::INFINITY;
        }
        (self.m2 / (self.n - 1.0) / self.n).sqrt()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateStats {
    /// Mixing angle: `x_hat = cos(theta) x + sin(theta) x'`.
    pub angle: f64,
    /// `E ||x_hat - x||^2`.
    pub supervised_objective: f64,
    /// `E ||x_hat - y||^2`.
    pub unsupervised_objective: f64,
    /// `E x_hat^T x`.
    pub cross_term: f64,
    pub cross_term_se: f64,
    /// `E||x_hat - x||^2 - (c - 2 E x_hat^T x)` with `c = 2 E||x||^2`.
    pub supervised_gap: f64,
    pub supervised_gap_se: f64,
    /// `E||x_hat - y||^2 - (c' - 2 E x_hat^T x)` with `c' = 2 E||x||^2 + E||n||^2`.
    pub unsupervised_gap: f64,
    pub unsupervised_gap_se: f64,
    /// Sample correlation between `x_hat` and the noise, logged only.
    pub noise_correlation: f64,
}

impl CandidateStats {
    pub fn gaps_within(&self, k_se: f64) -> bool {
        self.supervised_gap.abs() <= k_se * self.supervised_gap_se
            && self.unsupervised_gap.abs() <= k_se * self.unsupervised_gap_se
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankingReport {
    pub sigma_noise: f64,
    pub dim: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub supervised_constant: f64,
    pub unsupervised_constant: f64,
    pub candidates: Vec<CandidateStats>,
    /// Candidate indices sorted by increasing supervised objective.
    pub supervised_ranking: Vec<usize>,
    pub unsupervised_ranking: Vec<usize>,
    pub spearman: f64,
    /// Every gap within 3 standard errors of zero.
    pub gaps_ok: bool,
    /// The independent copy has `E x_hat^T x` within 3 standard errors of 0.
    pub independent_cross_ok: bool,
    /// Perfect reconstruction minimizes both objectives.
    pub identity_is_best: bool,
}

impl RankingReport {
    pub fn passed(&self) -> bool {
        self.spearman == 1.0 && self.gaps_ok && self.independent_cross_ok && self.identity_is_best
    }
}

fn ranking(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx
}

/// Spearman rank correlation of two score vectors without ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let rank_of = |v: &[f64]| {
        let mut r = vec![0usize; n];
        for (pos, i) in ranking(v).into_iter().enumerate() {
            r[i] = pos;
        }
        r
    };
    let (ra, rb) = (rank_of(a), rank_of(b));
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum();
    let n = n as f64;
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// `x ~ N(0, I_dim)`, `noise ~ N(0, sigma^2 I_dim)`, `y = x + noise`.
/// Candidates `x_hat = cos(theta) x + sin(theta) x'` with an independent copy
/// `x'` keep `p_{x_hat} = p_x` and `x_hat` independent of the noise.
pub fn check_noisy_target_ranking(sigma_noise: f64, dim: usize, n_samples: usize, seed: u64) -> Result<RankingReport> {
    if !(sigma_noise > 0.0) || !sigma_noise.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma_noise must be > 0, got {sigma_noise}")));
    }
    if dim == 0 || n_samples < 2 {
        return Err(Error::InvalidArgument("need dim >= 1 and at least 2 samples".into()));
    }
    let d = dim as f64;
    let sup_const = 2.0 * d;
    let unsup_const = 2.0 * d + d * sigma_noise * sigma_noise;
    let angles: Vec<f64> = (0..CANDIDATES).map(|k| k as f64 * FRAC_PI_8).collect();
    let mix: Vec<(f64, f64)> = angles.iter().map(|t| (t.cos(), t.sin())).collect();

    let mut rng = rng_from_seed(seed);
    let mut sup = [Moments::default(); CANDIDATES];
    let mut unsup = [Moments::default(); CANDIDATES];
    let mut cross = [Moments::default(); CANDIDATES];
    let mut sup_gap = [Moments::default(); CANDIDATES];
    let mut unsup_gap = [Moments::default(); CANDIDATES];
    let mut xn = [0.0f64; CANDIDATES];
    let mut xx = [0.0f64; CANDIDATES];
    let mut nn = 0.0f64;

    let mut x = vec![0.0; dim];
    let mut x2 = vec![0.0; dim];
    let mut noise = vec![0.0; dim];
    for _ in 0..n_samples {
        for v in x.iter_mut().chain(x2.iter_mut()) {
            *v = StandardNormal.sample(&mut rng);
        }
        for v in noise.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = sigma_noise * z;
        }
        nn += noise.iter().map(|v| v * v).sum::<f64>();
        for (k, &(c, s)) in mix.iter().enumerate() {
            let (mut a, mut b, mut t, mut hn, mut hh) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..dim {
                let h = c * x[i] + s * x2[i];
                let y = x[i] + noise[i];
                a += (h - x[i]).powi(2);
                b += (h - y).powi(2);
                t += h * x[i];
                hn += h * noise[i];
                hh += h * h;
            }
            sup[k].push(a);
            unsup[k].push(b);
            cross[k].push(t);
            sup_gap[k].push(a - (sup_const - 2.0 * t));
            unsup_gap[k].push(b - (unsup_const - 2.0 * t));
            xn[k] += hn;
            xx[k] += hh;
        }
    }

    let candidates: Vec<CandidateStats> = (0..CANDIDATES)
        .map(|k| CandidateStats {
            angle: angles[k],
            supervised_objective: sup[k].mean,
            unsupervised_objective: unsup[k].mean,
            cross_term: cross[k].mean,
            cross_term_se: cross[k].std_error(),
            supervised_gap: sup_gap[k].mean,
            supervised_gap_se: sup_gap[k].std_error(),
            unsupervised_gap: unsup_gap[k].mean,
            unsupervised_gap_se: unsup_gap[k].std_error(),
            noise_correlation: xn[k] / (xx[k] * nn).sqrt(),
        })
        .collect();
    let sup_scores: Vec<f64> = candidates.iter().map(|c| c.supervised_objective).collect();
    let unsup_scores: Vec<f64> = candidates.iter().map(|c| c.unsupervised_objective).collect();
    let supervised_ranking = ranking(&sup_scores);
    let unsupervised_ranking = ranking(&unsup_scores);
    let rho = spearman(&sup_scores, &unsup_scores);
    let gaps_ok = candidates.iter().all(|c| c.gaps_within(3.0));
    let last = &candidates[CANDIDATES - 1];
    let independent_cross_ok = last.cross_term.abs() <= 3.0 * last.cross_term_se;
    let identity_is_best = supervised_ranking[0] == 0 && unsupervised_ranking[0] == 0;
    Ok(RankingReport {
        sigma_noise,
        dim,
        n_samples,
        seed,
        supervised_constant: sup_const,
        unsupervised_constant: unsup_const,
        candidates,
        supervised_ranking,
        unsupervised_ranking,
        spearman: rho,
        gaps_ok,
        independent_cross_ok,
        identity_is_best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_extremes() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
    }

    #[test]
    fn small_run_ranks_identically() {
        let r = check_noisy_target_ranking(0.5, 4, 20_000, 5).unwrap();
        assert_eq!(r.spearman, 1.0);
        assert!(r.identity_is_best);
        assert_eq!(r.candidates[0].supervised_objective, 0.0);
    }

    #[test]
    fn rejects_bad_sigma() {
        assert!(check_noisy_target_ranking(0.0, 2, 100, 0).is_err());
    }
}
