//! Named parameter tensors in a fixed registration order.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Mat, Result};

/// Index of a tensor inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Standard deviation of the normal initializer for every weight matrix.
pub const INIT_STD: f64 = 0.02;

/// All trainable tensors of a model. Registration order is the optimizer's
/// update order and never changes after construction.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Mat>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Mat) -> ParamId {
        let name = name.into();
        assert!(
            !self.names.contains(&name),
            "parameter {name} registered twice"
        );
        self.names.push(name);
        self.tensors.push(value);
        ParamId(self.tensors.len() - 1)
    }

    pub fn normal(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut impl Rng,
    ) -> ParamId {
        let dist = Normal::new(0.0, INIT_STD).expect("valid std");
        let value = Mat::from_shape_fn((rows, cols), |_| dist.sample(rng));
        self.insert(name, value)
    }

    pub fn zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.insert(name, Mat::zeros((rows, cols)))
    }

    pub fn ones(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.insert(name, Mat::ones((rows, cols)))
    }

    pub fn get(&self, id: ParamId) -> &Mat {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn tensors(&self) -> &[Mat] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Mat] {
        &mut self.tensors
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Serializable snapshot keyed by name.
    pub fn to_named(&self) -> BTreeMap<String, NamedTensor> {
        self.names
            .iter()
            .zip(&self.tensors)
            .map(|(n, t)| (n.clone(), NamedTensor::from_mat(t)))
            .collect()
    }

    /// Overwrites every registered tensor from a snapshot. The snapshot must
    /// hold exactly the registered names with matching shapes.
    pub fn load_named(&mut self, named: &BTreeMap<String, NamedTensor>) -> Result<()> {
        if named.len() != self.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                self.len(),
                named.len()
            )));
        }
        for (name, tensor) in self.names.iter().zip(self.tensors.iter_mut()) {
            let src = named
                .get(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
            let value = src.to_mat()?;
            if value.dim() != tensor.dim() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name}: shape {:?}, expected {:?}",
                    value.dim(),
                    tensor.dim()
                )));
            }
            *tensor = value;
        }
        Ok(())
    }
}

/// Row-major tensor with explicit shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

impl NamedTensor {
    pub fn from_mat(m: &Mat) -> Self {
        Self {
            shape: [m.nrows(), m.ncols()],
            values: m.iter().copied().collect(),
        }
    }

    pub fn to_mat(&self) -> Result<Mat> {
        Mat::from_shape_vec((self.shape[0], self.shape[1]), self.values.clone())
            .map_err(|e| Error::Checkpoint(format!("bad tensor shape {:?}: {e}", self.shape)))
    }
}
