//! SGD-with-momentum and Adam, keyed by parameter path.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::real::Real;

const SGD_MOMENTUM: f64 = 0.9;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimKind {
    SgdMomentum,
    Adam,
}

#[derive(Debug, Clone)]
struct SlotState<T> {
    m: Vec<T>,
    v: Vec<T>,
}

/// Stateful optimizer. Weight decay touches only slots flagged for decay
/// (feature-mixing matrices), never biases or potential-field parameters.
#[derive(Debug, Clone)]
pub struct Optimizer<T: Real> {
    config: TrainConfig,
    state: HashMap<String, SlotState<T>>,
    steps: u64,
}

impl<T: Real> Optimizer<T> {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, state: HashMap::new(), steps: 0 })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update from the gradients accumulated in the model.
    /// `grad_scale` averages accumulated batch gradients; `epoch` selects the
    /// decayed learning rate. A non-finite gradient aborts, naming the key.
    pub fn step(&mut self, model: &mut Model<T>, epoch: usize, grad_scale: f64) -> Result<()> {
        self.steps += 1;
        let lr = T::of(self.config.lr_at_epoch(epoch));
        let wd = T::of(self.config.weight_decay);
        let scale = T::of(grad_scale);
        let kind = self.config.optimizer;
        let t = self.steps;

        let bias1 = T::of(1.0 - ADAM_BETA1.powi(t.min(i32::MAX as u64) as i32));
        let bias2 = T::of(1.0 - ADAM_BETA2.powi(t.min(i32::MAX as u64) as i32));
        let beta1 = T::of(ADAM_BETA1);
        let beta2 = T::of(ADAM_BETA2);
        let eps = T::of(ADAM_EPS);
        let momentum = T::of(SGD_MOMENTUM);

        let state = &mut self.state;
        let mut failure: Option<Error> = None;
        model.visit_params(&mut |slot| {
            if failure.is_some() {
                return;
            }
            let Some(grad) = slot.grad else { return };
            let entry = state.entry(slot.key.clone()).or_insert_with(|| SlotState {
                m: vec![T::zero(); grad.len()],
                v: vec![T::zero(); grad.len()],
            });
            for i in 0..grad.len() {
                let mut g = grad[i] * scale;
                if slot.decay {
                    g += wd * slot.value[i];
                }
                if !g.is_finite() {
                    failure = Some(Error::numeric(format!(
                        "non-finite gradient in parameter {}",
                        slot.key
                    )));
                    return;
                }
                match kind {
                    OptimKind::SgdMomentum => {
                        entry.m[i] = momentum * entry.m[i] + g;
                        slot.value[i] -= lr * entry.m[i];
                    }
                    OptimKind::Adam => {
                        entry.m[i] = beta1 * entry.m[i] + (T::one() - beta1) * g;
                        entry.v[i] = beta2 * entry.v[i] + (T::one() - beta2) * g * g;
                        let m_hat = entry.m[i] / bias1;
                        let v_hat = entry.v[i] / bias2;
                        slot.value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        });
        match failure {
            Some(e) => Err(e),
            None => {
                model.set_step(self.steps);
                Ok(())
            }
        }
    }
}
