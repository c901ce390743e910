use super::tensor::Param;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment accumulators, one entry per parameter tensor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

/// One bias-corrected Adam update of `value` from `grad`.
/// `step` is the already-incremented step counter.
#[allow(clippy::too_many_arguments)]
pub fn adam_update(
    value: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    cfg: &AdamConfig,
) -> Result<()> {
    if value.len() != grad.len() || m.len() != value.len() || v.len() != value.len() {
        return Err(Error::Shape(format!(
            "adam: value {}, grad {}, moments {}/{}",
            value.len(),
            grad.len(),
            m.len(),
            v.len()
        )));
    }
    let c1 = 1.0 - cfg.beta1.powi(step as i32);
    let c2 = 1.0 - cfg.beta2.powi(step as i32);
    for i in 0..value.len() {
        let g = grad[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let mhat = m[i] / c1;
        let vhat = v[i] / c2;
        value[i] -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub state: OptimizerState,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            state: OptimizerState::default(),
        }
    }

    /// Applies one update using each parameter's accumulated gradient.
    pub fn step(&mut self, params: &mut [&mut Param]) -> Result<()> {
        if self.state.first.is_empty() {
            self.state.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.state.second = params.iter().map(|p| vec![0.0; p.len()]).collect();
        }
        if self.state.first.len() != params.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} tensors, got {}",
                self.state.first.len(),
                params.len()
            )));
        }
        self.state.step += 1;
        let step = self.state.step;
        for ((p, m), v) in params
            .iter_mut()
            .zip(&mut self.state.first)
            .zip(&mut self.state.second)
        {
            adam_update(&mut p.value, &p.grad, m, v, step, &self.config)?;
        }
        Ok(())
    }
}
