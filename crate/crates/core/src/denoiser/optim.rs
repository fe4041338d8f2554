use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub lr: f64,
    /// Accumulator decay.
    pub rho: f64,
    pub eps: f64,
    /// Multiply the learning rate by `decay_factor` from this epoch on.
    pub decay_epoch: Option<usize>,
    pub decay_factor: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            rho: 0.9,
            eps: 1e-8,
            decay_epoch: None,
            decay_factor: 0.1,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !(0.0..1.0).contains(&self.rho) || !(self.eps > 0.0) || !(self.decay_factor > 0.0) {
            return Err(Error::InvalidArgument(format!("invalid optimizer settings {self:?}")));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.decay_epoch {
            Some(d) if epoch >= d => self.lr * self.decay_factor,
            _ => self.lr,
        }
    }
}

/// RMSProp: `v = rho v + (1 - rho) g^2`, `p -= lr g / (sqrt(v) + eps)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsProp<T> {
    pub settings: OptimizerSettings,
    pub accum: Vec<T>,
}

impl<T: Scalar> RmsProp<T> {
    pub fn new(settings: OptimizerSettings, n: usize) -> Result<Self> {
        settings.validate()?;
        Ok(Self { settings, accum: vec![T::zero(); n] })
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T], epoch: usize) -> Result<()> {
        if params.len() != self.accum.len() || grad.len() != self.accum.len() {
            return Err(Error::ShapeMismatch(format!(
                "optimizer for {} parameters given {} / {}",
                self.accum.len(),
                params.len(),
                grad.len()
            )));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient coordinate {i}")));
        }
        let rho = T::lit(self.settings.rho);
        let lr = T::lit(self.settings.lr_at(epoch));
        let eps = T::lit(self.settings.eps);
        for ((p, v), &g) in params.iter_mut().zip(&mut self.accum).zip(grad) {
            *v = rho * *v + (T::one() - rho) * g * g;
            *p -= lr * g / (v.sqrt() + eps);
            if !p.is_finite() {
                return Err(Error::NonFinite("parameter after optimizer step".into()));
            }
        }
        Ok(())
    }
}
