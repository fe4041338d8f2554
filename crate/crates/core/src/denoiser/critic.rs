//! Fully connected ReLU critic with a gradient penalty on its input gradient.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticSpec {
    /// Hidden layer widths; empty gives a linear critic.
    pub hidden: Vec<usize>,
    pub gp_weight: f64,
    /// Critic updates per generator update.
    pub steps: usize,
    /// Critic learning rate relative to the generator's.
    pub lr_scale: f64,
    /// Clamp weights (not biases) to `[-c, c]` after every critic update.
    pub weight_clip: Option<f64>,
}

impl Default for CriticSpec {
    fn default() -> Self {
        Self {
            hidden: vec![32],
            gp_weight: 10.0,
            steps: 5,
            lr_scale: 0.5,
            weight_clip: None,
        }
    }
}

impl CriticSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.gp_weight > 0.0) {
            return Err(Error::InvalidArgument(format!("gp_weight must be > 0, got {}", self.gp_weight)));
        }
        if self.steps == 0 || self.hidden.contains(&0) {
            return Err(Error::InvalidArgument("critic steps and widths must be positive".into()));
        }
        if matches!(self.weight_clip, Some(c) if !(c > 0.0)) {
            return Err(Error::InvalidArgument("weight_clip must be positive".into()));
        }
        Ok(())
    }
}

/// `D(x) = w_L . relu(W_{L-1} ... relu(W_1 x + b_1) ...) + b_L`, parameters
/// stored layer by layer as `W_k` (`[out][in]`) followed by `b_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Critic<T> {
    dims: Vec<usize>,
    pub values: Vec<T>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CriticLosses {
    /// `E D(fake) - E D(real) + gp_weight * E (||grad D(x_hat)|| - 1)^2`.
    pub loss: f64,
    /// `E D(real) - E D(fake)`.
    pub w1_estimate: f64,
    pub gradient_penalty: f64,
}

struct Pass<T> {
    /// Layer inputs `h_0 .. h_{L-1}`.
    h: Vec<Vec<T>>,
    /// Pre-activations `a_1 .. a_L`.
    a: Vec<Vec<T>>,
}

impl<T: Scalar> Critic<T> {
    pub fn zeros(input_dim: usize, hidden: &[usize]) -> Self {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let n = dims.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        Self { dims, values: vec![T::zero(); n] }
    }

    /// He-uniform weights, zero biases.
    pub fn init(input_dim: usize, hidden: &[usize], seed: u64) -> Self {
        let mut c = Self::zeros(input_dim, hidden);
        let mut rng = rng_from_seed(seed);
        for k in 0..c.layers() {
            let (off, nin, nout) = c.layer(k);
            let bound = (6.0 / nin as f64).sqrt();
            for v in &mut c.values[off..off + nin * nout] {
                *v = T::lit(rng.random_range(-bound..=bound));
            }
        }
        c
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn layers(&self) -> usize {
        self.dims.len() - 1
    }

    /// Offset of `W_k`, its fan-in and fan-out. `b_k` follows the weights.
    fn layer(&self, k: usize) -> (usize, usize, usize) {
        let off = self.dims.windows(2).take(k).map(|w| w[1] * (w[0] + 1)).sum();
        (off, self.dims[k], self.dims[k + 1])
    }

    pub fn clip_weights(&mut self, c: f64) {
        let c = T::lit(c);
        for k in 0..self.layers() {
            let (off, nin, nout) = self.layer(k);
            for v in &mut self.values[off..off + nin * nout] {
                *v = v.max(-c).min(c);
            }
        }
    }

    fn pass(&self, x: &[T]) -> Pass<T> {
        let mut h = vec![x.to_vec()];
        let mut a = Vec::with_capacity(self.layers());
        for k in 0..self.layers() {
            let (off, nin, nout) = self.layer(k);
            let w = &self.values[off..off + nin * nout];
            let b = &self.values[off + nin * nout..off + nout * (nin + 1)];
            let inp = h.last().unwrap();
            let pre: Vec<T> = (0..nout)
                .map(|o| b[o] + w[o * nin..(o + 1) * nin].iter().zip(inp).map(|(&p, &q)| p * q).sum::<T>())
                .collect();
            if k + 1 < self.layers() {
                h.push(pre.iter().map(|v| v.max(T::zero())).collect());
            }
            a.push(pre);
        }
        Pass { h, a }
    }

    pub fn score(&self, x: &[T]) -> T {
        self.pass(x).a.last().unwrap()[0]
    }

    /// Backward vectors `delta_k = m_k * (W_{k+1}^T delta_{k+1})` for the
    /// hidden layers (index `k - 1` holds layer `k`), then `grad_x D`.
    fn deltas(&self, pass: &Pass<T>) -> (Vec<Vec<T>>, Vec<T>) {
        let l = self.layers();
        let (off, nin, _) = self.layer(l - 1);
        let mut u: Vec<T> = self.values[off..off + nin].to_vec();
        let mut deltas = vec![Vec::new(); l - 1];
        for k in (0..l - 1).rev() {
            let d: Vec<T> = u
                .iter()
                .zip(&pass.a[k])
                .map(|(&v, &pre)| if pre > T::zero() { v } else { T::zero() })
                .collect();
            let (off, nin, nout) = self.layer(k);
            let w = &self.values[off..off + nin * nout];
            let mut next = vec![T::zero(); nin];
            for (o, &dv) in d.iter().enumerate() {
                for (n, &wv) in next.iter_mut().zip(&w[o * nin..(o + 1) * nin]) {
                    *n += wv * dv;
                }
            }
            deltas[k] = d;
            u = next;
        }
        (deltas, u)
    }

    /// `grad_x D(x)`.
    pub fn input_grad(&self, x: &[T]) -> Vec<T> {
        self.deltas(&self.pass(x)).1
    }

    /// Adds `scale * d D(x) / d params` to `grad`.
    fn add_score_grad(&self, x: &[T], scale: T, grad: &mut [T]) {
        let pass = self.pass(x);
        let (deltas, _) = self.deltas(&pass);
        for k in 0..self.layers() {
            let (off, nin, nout) = self.layer(k);
            let d: &[T] = if k + 1 == self.layers() { &[T::one()][..] } else { &deltas[k] };
            let d = d.to_vec();
            for o in 0..nout {
                let s = scale * d[o];
                for (g, &hv) in grad[off + o * nin..off + (o + 1) * nin].iter_mut().zip(&pass.h[k]) {
                    *g += s * hv;
                }
                grad[off + nin * nout + o] += s;
            }
        }
    }

    /// Adds `scale * d P / d params` for `P = (||grad_x D(x)|| - 1)^2` (ReLU
    /// masks held fixed) and returns `P`.
    fn add_penalty_grad(&self, x: &[T], scale: T, grad: &mut [T]) -> T {
        let pass = self.pass(x);
        let (deltas, g) = self.deltas(&pass);
        let norm = g.iter().map(|v| *v * *v).sum::<T>().sqrt();
        let p = (norm - T::one()) * (norm - T::one());
        if norm == T::zero() {
            return p;
        }
        let c = T::lit(2.0) * (norm - T::one()) / norm;
        let mut r: Vec<T> = g.iter().map(|&v| c * v).collect();
        let l = self.layers();
        for k in 0..l - 1 {
            let (off, nin, nout) = self.layer(k);
            let mut s = vec![T::zero(); nout];
            for o in 0..nout {
                let dk = deltas[k][o];
                let row = off + o * nin;
                for j in 0..nin {
                    grad[row + j] += scale * dk * r[j];
                    s[o] += self.values[row + j] * r[j];
                }
            }
            r = s
                .iter()
                .zip(&pass.a[k])
                .map(|(&v, &pre)| if pre > T::zero() { v } else { T::zero() })
                .collect();
        }
        let (off, nin, _) = self.layer(l - 1);
        for (gv, &rv) in grad[off..off + nin].iter_mut().zip(&r) {
            *gv += scale * rv;
        }
        p
    }

    /// Critic objective and its parameter gradient. Interpolates are
    /// `t_i real_i + (1 - t_i) fake_i`.
    pub fn loss_and_grad(&self, real: &[Vec<T>], fake: &[Vec<T>], t: &[T], gp_weight: T) -> Result<(CriticLosses, Vec<T>)> {
        if real.is_empty() || real.len() != fake.len() || t.len() != real.len() {
            return Err(Error::ShapeMismatch("critic batches must share a positive size".into()));
        }
        let dim = self.input_dim();
        if real.iter().chain(fake).any(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: real[0].len() });
        }
        let b = T::from_usize_lossy(real.len());
        let mut grad = vec![T::zero(); self.len()];
        let (mut dr, mut df, mut gp) = (T::zero(), T::zero(), T::zero());
        for i in 0..real.len() {
            dr += self.score(&real[i]);
            df += self.score(&fake[i]);
            self.add_score_grad(&real[i], -T::one() / b, &mut grad);
            self.add_score_grad(&fake[i], T::one() / b, &mut grad);
            let xi: Vec<T> = real[i].iter().zip(&fake[i]).map(|(&r, &f)| t[i] * r + (T::one() - t[i]) * f).collect();
            gp += self.add_penalty_grad(&xi, gp_weight / b, &mut grad);
        }
        let (dr, df, gp) = (dr / b, df / b, gp / b);
        let losses = CriticLosses {
            loss: (df - dr + gp_weight * gp).as_f64(),
            w1_estimate: (dr - df).as_f64(),
            gradient_penalty: gp.as_f64(),
        };
        if !losses.loss.is_finite() {
            return Err(Error::NonFinite(format!("critic loss {}", losses.loss)));
        }
        Ok((losses, grad))
    }
}
