use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::{Array, ParamStore};

use super::TrainConfig;

/// Refined-term weight for `epoch`, rising linearly from `lambda0` at the
/// first epoch to `lambda1` at the last.
pub fn lambda_schedule(epoch: usize, cfg: &TrainConfig) -> Result<f64> {
    if epoch >= cfg.epochs {
        return Err(Error::InvalidArgument(format!(
            "epoch {epoch} outside 0..{}",
            cfg.epochs
        )));
    }
    if cfg.epochs == 1 {
        return Ok(cfg.lambda0);
    }
    let t = epoch as f64 / (cfg.epochs - 1) as f64;
    Ok(cfg.lambda0 + (cfg.lambda1 - cfg.lambda0) * t)
}

/// Stepwise decay: `max(lr_floor, lr0 * lr_decay^floor(epoch / lr_decay_epochs))`.
pub fn lr_schedule(epoch: usize, cfg: &TrainConfig) -> f64 {
    let steps = (epoch / cfg.lr_decay_epochs) as i32;
    (cfg.lr0 * cfg.lr_decay.powi(steps)).max(cfg.lr_floor)
}

/// Bias-corrected Adam.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    moments: BTreeMap<String, (Array, Array)>,
}

impl Default for Adam {
    fn default() -> Self {
        Self::new(0.9, 0.999, 1e-8)
    }
}

impl Adam {
    pub fn new(beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    /// Updates every parameter in `params`; `grads` must cover each one with
    /// a matching shape.
    pub fn step(&mut self, params: &mut ParamStore, grads: &BTreeMap<String, Array>, lr: f64) -> Result<()> {
        for (name, value) in params.iter() {
            let grad = grads.get(name).ok_or_else(|| Error::MissingParam(name.to_string()))?;
            if grad.shape() != value.shape() {
                return Err(Error::ShapeMismatch {
                    op: "adam_step",
                    shapes: format!("{name}: param {:?}, grad {:?}", value.shape(), grad.shape()),
                });
            }
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (name, value) in params.iter_mut() {
            let grad = &grads[name];
            let (m, v) = self
                .moments
                .entry(name.to_string())
                .or_insert_with(|| (Array::zeros(value.shape()), Array::zeros(value.shape())));
            let w = value.data_mut();
            let (m, v) = (m.data_mut(), v.data_mut());
            for (i, &g) in grad.data().iter().enumerate() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                w[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
