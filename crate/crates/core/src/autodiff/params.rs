use std::collections::HashMap;

use rand::Rng;

use super::Tensor;
use crate::error::{Error, Result};
use crate::rng::{seeded_rng, SeededRng};

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Option<Tensor>,
}

/// Named trainable tensors in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter `{name}`")));
        }
        self.index.insert(name.clone(), self.params.len());
        self.params.push(Param {
            name,
            value,
            grad: None,
        });
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.id(name).map(|id| &mut self.params[id.0])
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    /// Total scalar count over all parameters.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Adds gradients from one backward pass. Parameters the pass did not
    /// reach receive zeros, so every parameter has a gradient afterwards.
    pub fn accumulate(&mut self, grads: &[(ParamId, Tensor)]) {
        for p in &mut self.params {
            if p.grad.is_none() {
                p.grad = Some(Tensor::zeros(&p.value.shape));
            }
        }
        for (id, g) in grads {
            if let Some(acc) = self.params[id.0].grad.as_mut() {
                acc.add_assign(g);
            }
        }
    }

    pub fn clear_grads(&mut self) {
        for p in &mut self.params {
            p.grad = None;
        }
    }
}

fn glorot_bound(shape: &[usize]) -> f64 {
    let (fan_in, fan_out) = match shape {
        [] => (1, 1),
        [n] => (*n, *n),
        [a, b] => (*a, *b),
        more => (more[more.len() - 2], more[more.len() - 1]),
    };
    (6.0 / (fan_in + fan_out).max(1) as f64).sqrt()
}

/// Uniform Glorot initialisation drawn from an existing generator.
pub fn glorot_with(rng: &mut SeededRng, shape: &[usize]) -> Tensor {
    let a = glorot_bound(shape);
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-a..=a)).collect();
    Tensor {
        shape: shape.to_vec(),
        data,
    }
}

/// Uniform Glorot initialisation: `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_init(shape: &[usize], seed: u64) -> Tensor {
    glorot_with(&mut seeded_rng(seed), shape)
}
