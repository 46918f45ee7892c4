use serde::{Deserialize, Serialize};

use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

/// First-order optimizer over every parameter of a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Optimizer {
            kind,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn sgd(learning_rate: f64) -> Self {
        Self::new(OptimizerKind::Sgd, learning_rate)
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self::new(OptimizerKind::Adam, learning_rate)
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update from the stored gradients, then clears them.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        if let Some(p) = store.iter().find(|p| p.grad.is_none()) {
            return Err(Error::MissingGradient(p.name.clone()));
        }
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for p in store.iter_mut() {
                    let g = p.grad.take().expect("checked above");
                    for (w, d) in p.value.data.iter_mut().zip(&g.data) {
                        *w -= self.learning_rate * d;
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.m.len() != store.len() {
                    self.m = store.iter().map(|p| Tensor::zeros(&p.value.shape)).collect();
                    self.v = self.m.clone();
                }
                let t = self.step as i32;
                let bc1 = 1.0 - self.beta1.powi(t);
                let bc2 = 1.0 - self.beta2.powi(t);
                for ((p, m), v) in store.iter_mut().zip(&mut self.m).zip(&mut self.v) {
                    let g = p.grad.take().expect("checked above");
                    for (k, d) in g.data.iter().enumerate() {
                        m.data[k] = self.beta1 * m.data[k] + (1.0 - self.beta1) * d;
                        v.data[k] = self.beta2 * v.data[k] + (1.0 - self.beta2) * d * d;
                        let m_hat = m.data[k] / bc1;
                        let v_hat = v.data[k] / bc2;
                        p.value.data[k] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
                    }
                }
            }
        }
        Ok(())
    }
}
