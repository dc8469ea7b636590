use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::array::Array;
use super::backward::Gradients;
use super::graph::{Graph, NodeId};
use crate::error::{Error, Result};

/// Named parameter arrays, kept in sorted name order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore {
    entries: BTreeMap<String, Array>,
    rng_seed: u64,
}

impl ParamStore {
    pub fn new(rng_seed: u64) -> Self {
        Self {
            entries: BTreeMap::new(),
            rng_seed,
        }
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter `{name}`")));
        }
        self.entries.insert(name, value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Array> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Array> {
        self.entries
            .get_mut(name)
            .ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Array)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of learnable scalars.
    pub fn scalar_count(&self) -> usize {
        self.entries.values().map(Array::len).sum()
    }

    /// Adds all parameters to `g` as differentiable leaves.
    pub fn bind(&self, g: &mut Graph) -> BoundParams {
        let ids = self
            .entries
            .iter()
            .map(|(name, value)| (name.clone(), g.input(value.clone())))
            .collect();
        BoundParams { ids }
    }

    /// Adds all parameters as constants, for inference graphs.
    pub fn bind_constant(&self, g: &mut Graph) -> BoundParams {
        let ids = self
            .entries
            .iter()
            .map(|(name, value)| (name.clone(), g.constant(value.clone())))
            .collect();
        BoundParams { ids }
    }
}

/// Node handles for a [`ParamStore`] bound into one graph.
pub struct BoundParams {
    ids: BTreeMap<String, NodeId>,
}

impl BoundParams {
    pub fn get(&self, name: &str) -> Result<NodeId> {
        self.ids
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    /// Points `name` at another node, e.g. a leaf under test.
    pub fn replace(&mut self, name: &str, id: NodeId) -> Result<()> {
        match self.ids.get_mut(name) {
            Some(slot) => {
                *slot = id;
                Ok(())
            }
            None => Err(Error::MissingParam(name.to_string())),
        }
    }

    /// Per-parameter gradients; parameters that did not influence the
    /// root get zeros so the map always covers the whole store.
    pub fn collect(&self, g: &Graph, grads: &Gradients) -> BTreeMap<String, Array> {
        self.ids
            .iter()
            .map(|(name, &id)| {
                let grad = grads
                    .get(id)
                    .cloned()
                    .unwrap_or_else(|| Array::zeros(g.value(id).shape()));
                (name.clone(), grad)
            })
            .collect()
    }
}

/// Builds parameter stores with deterministic initialization.
pub struct Initializer {
    store: ParamStore,
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Self {
            store: ParamStore::new(seed),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Linear layer `prefix.weight` (`fan_in x fan_out`, uniform in
    /// `±sqrt(6 / (fan_in + fan_out))`) and `prefix.bias` (zeros).
    pub fn linear(&mut self, prefix: &str, fan_in: usize, fan_out: usize) -> Result<()> {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let rng = &mut self.rng;
        let weight = Array::from_fn(&[fan_in, fan_out], |_| rng.gen_range(-bound..=bound));
        self.store.insert(format!("{prefix}.weight"), weight)?;
        self.store.insert(format!("{prefix}.bias"), Array::zeros(&[fan_out]))
    }

    /// Linear layer with all-zero weight and bias.
    pub fn zero_linear(&mut self, prefix: &str, fan_in: usize, fan_out: usize) -> Result<()> {
        self.store
            .insert(format!("{prefix}.weight"), Array::zeros(&[fan_in, fan_out]))?;
        self.store.insert(format!("{prefix}.bias"), Array::zeros(&[fan_out]))
    }

    pub fn scalar(&mut self, name: &str, value: f64) -> Result<()> {
        self.store.insert(name, Array::scalar(value))
    }

    pub fn finish(self) -> ParamStore {
        self.store
    }
}
