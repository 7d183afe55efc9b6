use std::f64::consts::PI;

use crate::error::{KernelError, Result};
use crate::params::ParameterStore;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Adam,
    /// Adam with decoupled weight decay.
    AdamW { weight_decay: f32 },
    RmsProp,
}

/// Update-rule constants. Learning rate is supplied per step so a schedule
/// can drive it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub beta1: f32,
    pub beta2: f32,
    /// Smoothing constant for RMSprop's running mean square.
    pub alpha: f32,
    pub eps: f32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        Self {
            kind,
            beta1: 0.9,
            beta2: 0.999,
            alpha: 0.99,
            eps: 1e-8,
        }
    }

    pub fn adam() -> Self {
        Self::new(OptimizerKind::Adam)
    }

    pub fn adamw(weight_decay: f32) -> Self {
        Self::new(OptimizerKind::AdamW { weight_decay })
    }

    pub fn rmsprop() -> Self {
        Self::new(OptimizerKind::RmsProp)
    }

    /// Applies one update from the store's gradient buffers, advances the
    /// step counter, then zeroes the gradients. Nothing is modified if any
    /// gradient is non-finite.
    pub fn step(&self, store: &mut ParameterStore, lr: f32) -> Result<()> {
        for id in store.ids() {
            if !store.grad(id).iter().all(|g| g.is_finite()) {
                return Err(KernelError::Divergence {
                    step: store.step(),
                    what: format!("non-finite gradient in `{}`", store.name(id)),
                });
            }
        }
        let t = store.step() as i32 + 1;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for idx in 0..store.len() {
            let (value, grad, state) = store.entry_parts(idx);
            match self.kind {
                OptimizerKind::Adam | OptimizerKind::AdamW { .. } => {
                    let decay = match self.kind {
                        OptimizerKind::AdamW { weight_decay } => weight_decay,
                        _ => 0.0,
                    };
                    for k in 0..value.len() {
                        let g = grad[k];
                        state.first[k] = self.beta1 * state.first[k] + (1.0 - self.beta1) * g;
                        state.second[k] = self.beta2 * state.second[k] + (1.0 - self.beta2) * g * g;
                        let m_hat = state.first[k] / bc1;
                        let v_hat = state.second[k] / bc2;
                        value[k] -= lr * decay * value[k];
                        value[k] -= lr * m_hat / (v_hat.sqrt() + self.eps);
                    }
                }
                OptimizerKind::RmsProp => {
                    for k in 0..value.len() {
                        let g = grad[k];
                        state.second[k] = self.alpha * state.second[k] + (1.0 - self.alpha) * g * g;
                        value[k] -= lr * g / (state.second[k].sqrt() + self.eps);
                    }
                }
            }
            grad.fill(0.0);
        }
        store.advance_step();
        Ok(())
    }
}

/// Linear warm-up from 0 to `peak_lr` over `warmup_steps`, then cosine decay
/// to 0 at `total_steps`. Steps past the end clamp to 0.
pub fn lr_schedule(step: u64, warmup_steps: u64, total_steps: u64, peak_lr: f32) -> f32 {
    if step < warmup_steps {
        return peak_lr * step as f32 / warmup_steps as f32;
    }
    if step >= total_steps {
        return 0.0;
    }
    let span = (total_steps - warmup_steps) as f64;
    let progress = (step - warmup_steps) as f64 / span;
    (peak_lr as f64 * 0.5 * (1.0 + (PI * progress).cos())) as f32
}
