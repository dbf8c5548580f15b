use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to one named parameter tensor inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// The trainable parameters of a model.
///
/// Registration order is part of the model definition: re-creating a set with
/// the same seed and the same registration sequence reproduces every value
/// bit-for-bit.
#[derive(Debug, Clone)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    by_name: HashMap<String, usize>,
    seed: u64,
    rng: ChaCha8Rng,
}

impl ParamSet {
    pub fn new(seed: u64) -> Self {
        ParamSet {
            names: Vec::new(),
            tensors: Vec::new(),
            by_name: HashMap::new(),
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    fn register(&mut self, name: &str, tensor: Tensor) -> ParamId {
        assert!(
            !self.by_name.contains_key(name),
            "parameter `{name}` registered twice"
        );
        let id = self.tensors.len();
        self.by_name.insert(name.to_string(), id);
        self.names.push(name.to_string());
        self.tensors.push(tensor);
        ParamId(id)
    }

    /// Glorot-style uniform initialization from the tensor's fan sizes.
    ///
    /// For a `[rows, cols]` matrix the range is `±sqrt(6 / (rows + cols))`;
    /// a vector of length n uses `±sqrt(6 / n)`.
    pub fn add_glorot(&mut self, name: &str, shape: Vec<usize>) -> ParamId {
        let fan: usize = match shape.len() {
            0 => 1,
            1 => shape[0],
            _ => shape[0] + shape[1],
        };
        let limit = (6.0 / fan.max(1) as f64).sqrt();
        let n: usize = shape.iter().product();
        let values: Vec<f64> = (0..n)
            .map(|_| self.rng.random_range(-limit..limit))
            .collect();
        self.register(name, Tensor::new(shape, values).expect("sized by product"))
    }

    /// Uniform initialization in `±limit`.
    pub fn add_uniform(&mut self, name: &str, shape: Vec<usize>, limit: f64) -> ParamId {
        let n: usize = shape.iter().product();
        let values: Vec<f64> = (0..n)
            .map(|_| self.rng.random_range(-limit..limit))
            .collect();
        self.register(name, Tensor::new(shape, values).expect("sized by product"))
    }

    pub fn add_const(&mut self, name: &str, shape: Vec<usize>, value: f64) -> ParamId {
        let n: usize = shape.iter().product();
        self.register(name, Tensor::new(shape, vec![value; n]).expect("sized by product"))
    }

    pub fn add_zeros(&mut self, name: &str, shape: Vec<usize>) -> ParamId {
        self.add_const(name, shape, 0.0)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names
            .iter()
            .map(|n| n.as_str())
            .zip(self.tensors.iter())
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    /// Store `grads` into each tensor's grad buffer for inspection.
    pub fn store_grads(&mut self, grads: &Gradients) -> Result<()> {
        if grads.bufs.len() != self.tensors.len() {
            return Err(Error::InvalidArgument(format!(
                "gradients for {} parameters, set has {}",
                grads.bufs.len(),
                self.tensors.len()
            )));
        }
        for (tensor, buf) in self.tensors.iter_mut().zip(grads.bufs.iter()) {
            tensor.set_grad(buf.clone())?;
        }
        Ok(())
    }
}

/// Per-parameter gradient buffers produced by [`crate::tape::Tape::backward`].
///
/// Parameters the loss never touched keep an all-zero buffer.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub(crate) bufs: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &ParamSet) -> Self {
        Gradients {
            bufs: params.tensors.iter().map(|t| vec![0.0; t.len()]).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.bufs[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.bufs[id.0]
    }

    pub fn param_count(&self) -> usize {
        self.bufs.len()
    }
}
