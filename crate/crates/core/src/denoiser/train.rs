use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::critic::{Critic, CriticLosses};
use super::loss::{loss_and_grad, LossParts, LossSpec, Objective, PenaltyMode};
use super::net::{backward_batch, forward, forward_batch, DenoiserParams, NetSpec};
use super::optim::{OptimizerSettings, RmsProp};
use crate::error::{Error, Result};
use crate::image::ImagePatch;
use crate::metrics::{mean_distance, psnr_set};
use crate::ot::euclidean;
use crate::rng::{derive_named, rng_from_seed, Rng};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerSettings,
    pub loss: LossSpec,
    pub seed: u64,
    /// Abort when a batch loss exceeds this value.
    pub divergence_threshold: f64,
}

impl TrainSettings {
    pub fn new(loss: LossSpec, epochs: usize, batch_size: usize, seed: u64) -> Self {
        Self {
            epochs,
            batch_size,
            optimizer: OptimizerSettings::default(),
            loss,
            seed,
            divergence_threshold: 1e6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch_size must be positive".into()));
        }
        self.optimizer.validate()?;
        self.loss.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Batch means over the epoch.
    pub loss: f64,
    pub fidelity: f64,
    pub w1: f64,
    /// `NaN` when no validation set was given.
    #[serde(with = "crate::metrics::db_serde")]
    pub val_psnr_db: f64,
    pub val_fidelity: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: DenoiserParams<T>,
    pub curve: Vec<EpochRecord>,
    pub critic: Option<Critic<T>>,
}

/// Held-out noisy patches with their clean ground truth.
#[derive(Debug, Clone, Copy)]
pub struct Validation<'a, T> {
    pub noisy: &'a [ImagePatch<T>],
    pub clean: &'a [ImagePatch<T>],
}

/// PSNR of the clipped outputs to the ground truth and mean `||y - f(y)||`.
pub fn validate_model<T: Scalar>(params: &DenoiserParams<T>, val: &Validation<'_, T>) -> Result<(f64, f64)> {
    let out = forward(params, val.noisy)?;
    let shown: Vec<_> = out.iter().map(ImagePatch::clipped).collect();
    Ok((psnr_set(val.clean, &shown, 1.0)?, mean_distance(val.noisy, &out)?))
}

fn permutation(rng: &mut Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

fn pick<T: Clone>(set: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| set[i].clone()).collect()
}

struct CriticState<T> {
    critic: Critic<T>,
    opt: RmsProp<T>,
}

/// Critic updates followed by one generator update. The generator sees
/// `fidelity - lambda * mean D(f(y))`.
fn critic_round<T: Scalar>(
    params: &DenoiserParams<T>,
    state: &mut CriticState<T>,
    loss: &LossSpec,
    noisy: &[ImagePatch<T>],
    clean_pool: &[ImagePatch<T>],
    rng: &mut Rng,
    epoch: usize,
) -> Result<(LossParts, Vec<T>, CriticLosses)> {
    let spec = loss.critic.as_ref().expect("validated critic spec");
    let b = noisy.len();
    let flat = |v: &[ImagePatch<T>]| -> Vec<Vec<T>> { v.iter().map(|p| p.pixels().to_vec()).collect() };
    let mut last = CriticLosses::default();
    for _ in 0..spec.steps {
        let fake = flat(&forward(params, noisy)?);
        let idx: Vec<usize> = (0..b).map(|_| rng.random_range(0..clean_pool.len())).collect();
        let real = flat(&pick(clean_pool, &idx));
        let t: Vec<T> = (0..b).map(|_| T::lit(rng.random::<f64>())).collect();
        let (l, g) = state.critic.loss_and_grad(&real, &fake, &t, T::lit(spec.gp_weight))?;
        state.opt.step(&mut state.critic.values, &g, epoch)?;
        if let Some(c) = spec.weight_clip {
            state.critic.clip_weights(c);
        }
        last = l;
    }
    let traces = forward_batch(params, noisy)?;
    let bt = T::from_usize_lossy(b);
    let lambda = T::lit(loss.lambda);
    let beta = T::lit(loss.beta);
    let mut fidelity = T::zero();
    let mut score = T::zero();
    let mut grad_out = Vec::with_capacity(b);
    for (t, y) in traces.iter().zip(noisy) {
        let z = t.output();
        let mut g: Vec<T> = state.critic.input_grad(z).into_iter().map(|v| -lambda * v / bt).collect();
        score += state.critic.score(z);
        let r = euclidean(z, y.pixels());
        fidelity += r.powf(beta);
        if loss.objective == Objective::Relaxed && r > T::zero() {
            let coef = beta * r.powf(beta - T::lit(2.0)) / bt;
            for ((gv, &a), &c) in g.iter_mut().zip(z).zip(y.pixels()) {
                *gv += coef * (a - c);
            }
        }
        grad_out.push(g);
    }
    let fidelity = fidelity / bt;
    let penalty = -lambda * score / bt;
    let total = if loss.objective == Objective::Relaxed { fidelity + penalty } else { penalty };
    let parts = LossParts {
        loss: total.as_f64(),
        fidelity: fidelity.as_f64(),
        w1: last.w1_estimate,
    };
    Ok((parts, backward_batch(params, &traces, &grad_out), last))
}

/// Trains from the identity initialization. `targets` is the clean pool,
/// sampled independently of `noisy`, for the transport objectives, and the
/// index-aligned target set for the supervised objective.
pub fn train<T: Scalar>(
    spec: &NetSpec,
    settings: &TrainSettings,
    noisy: &[ImagePatch<T>],
    targets: &[ImagePatch<T>],
    val: Option<Validation<'_, T>>,
) -> Result<TrainOutcome<T>> {
    settings.validate()?;
    let b = settings.batch_size;
    if noisy.len() < 2 * b || targets.len() < 2 * b {
        return Err(Error::InvalidArgument(format!(
            "need at least {} patches per domain, have {} noisy / {} targets",
            2 * b,
            noisy.len(),
            targets.len()
        )));
    }
    let supervised = settings.loss.objective == Objective::Supervised;
    if supervised && targets.len() != noisy.len() {
        return Err(Error::InvalidArgument("supervised training needs paired targets".into()));
    }
    spec.validate(noisy[0].height(), noisy[0].width())?;
    let seed = settings.seed;
    let mut params = DenoiserParams::init(spec.clone(), derive_named(seed, "init"));
    let mut opt = RmsProp::new(settings.optimizer.clone(), params.len())?;
    let critic_mode = settings.loss.penalty == PenaltyMode::CriticWganGp && !supervised;
    let mut critic = if critic_mode {
        let cs = settings.loss.critic.as_ref().expect("validated critic spec");
        let c = Critic::init(noisy[0].len(), &cs.hidden, derive_named(seed, "critic"));
        let opt_settings = OptimizerSettings {
            lr: settings.optimizer.lr * cs.lr_scale,
            ..settings.optimizer.clone()
        };
        let n = c.len();
        Some(CriticState { critic: c, opt: RmsProp::new(opt_settings, n)? })
    } else {
        None
    };
    let mut rng = rng_from_seed(derive_named(seed, "batches"));
    let mut curve = Vec::with_capacity(settings.epochs);
    let batches = noisy.len().min(targets.len()) / b;
    for epoch in 0..settings.epochs {
        let pn = permutation(&mut rng, noisy.len());
        let pc = if supervised { pn.clone() } else { permutation(&mut rng, targets.len()) };
        let mut sums = LossParts::default();
        for k in 0..batches {
            let yb = pick(noisy, &pn[k * b..(k + 1) * b]);
            let xb = pick(targets, &pc[k * b..(k + 1) * b]);
            let (parts, grad) = match critic.as_mut() {
                Some(state) => {
                    let (p, g, _) = critic_round(&params, state, &settings.loss, &yb, targets, &mut rng, epoch)?;
                    (p, g)
                }
                None => loss_and_grad(&params, &settings.loss, &yb, &xb)?,
            };
            if !parts.loss.is_finite() || parts.loss.abs() > settings.divergence_threshold {
                return Err(Error::Diverged { epoch, loss: parts.loss, curve });
            }
            opt.step(&mut params.values, &grad, epoch)?;
            sums.loss += parts.loss;
            sums.fidelity += parts.fidelity;
            sums.w1 += parts.w1;
        }
        let nb = batches as f64;
        let (val_psnr_db, val_fidelity) = match &val {
            Some(v) => validate_model(&params, v)?,
            None => (f64::NAN, f64::NAN),
        };
        curve.push(EpochRecord {
            epoch,
            lr: settings.optimizer.lr_at(epoch),
            loss: sums.loss / nb,
            fidelity: sums.fidelity / nb,
            w1: sums.w1 / nb,
            val_psnr_db,
            val_fidelity,
        });
    }
    Ok(TrainOutcome {
        params,
        curve,
        critic: critic.map(|s| s.critic),
    })
}
