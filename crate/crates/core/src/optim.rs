//! Adam with L2 weight decay.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EncoderParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Apply decay directly to the weights (AdamW) instead of adding it to the gradient.
    pub decoupled: bool,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 5e-4,
            decoupled: false,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("train.lr must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("adam betas must lie in [0, 1)".into()));
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::Config(format!(
                "train.weight_decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: EncoderParams,
    v: EncoderParams,
    step: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig, params: &EncoderParams) -> Self {
        Adam {
            cfg,
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update in place. Rejects non-finite gradients without touching the state.
    pub fn step(&mut self, params: &mut EncoderParams, grad: &EncoderParams) -> Result<()> {
        if !grad.is_finite() {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let c = &self.cfg;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let l2 = if c.decoupled { 0.0 } else { c.weight_decay };
        let shrink = if c.decoupled { 1.0 - c.lr * c.weight_decay } else { 1.0 };
        let params_t = params.tensors_mut();
        let m_t = self.m.tensors_mut();
        let v_t = self.v.tensors_mut();
        let g_t = grad.tensors();
        for (((w, m), v), (_, g)) in params_t.into_iter().zip(m_t).zip(v_t).zip(g_t) {
            update(w, m, v, g, c, l2, shrink, bc1, bc2);
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn update(
    w: &mut Array2<f64>,
    m: &mut Array2<f64>,
    v: &mut Array2<f64>,
    g: &Array2<f64>,
    c: &AdamConfig,
    l2: f64,
    shrink: f64,
    bc1: f64,
    bc2: f64,
) {
    Zip::from(w).and(m).and(v).and(g).for_each(|w, m, v, &g| {
        let g = g + l2 * *w;
        *m = c.beta1 * *m + (1.0 - c.beta1) * g;
        *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *w = *w * shrink - c.lr * m_hat / (v_hat.sqrt() + c.eps);
    });
}
