//! Dense reverse-mode automatic differentiation.
//!
//! Trainable tensors live in a [`ParamStore`] and persist across steps. Each
//! forward pass records its operations on a fresh [`Tape`]; [`Tape::backward`]
//! walks the record in reverse and accumulates (`+=`) gradients into the store.
//!
//! ```
//! use dsgc_core::autodiff::{ParamStore, Tape};
//! use dsgc_core::tensor::Matrix;
//!
//! let mut store = ParamStore::new();
//! let x = store.add("x", Matrix::scalar(3.0));
//! let mut tape = Tape::new();
//! let xv = tape.param(&store, x);
//! let sq = tape.mul(xv, xv).unwrap();
//! let root = tape.sum(sq).unwrap();
//! tape.backward(root, &mut store).unwrap();
//! assert_eq!(store.grad(x).item(), 6.0);
//! ```

mod adam;
pub(crate) mod tape;

pub use adam::{Adam, AdamConfig};
pub use tape::{Tape, Var};

use alloc::string::String;
use alloc::vec::Vec;

use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape { op: &'static str, lhs: (usize, usize), rhs: (usize, usize) },
    #[error("domain error in {op}: argument {value} outside {domain}")]
    Domain { op: &'static str, value: f64, domain: &'static str },
    #[error("backward needs a 1x1 root, got {0:?}")]
    NonScalarRoot((usize, usize)),
    #[error("variable was recorded on a different tape")]
    ForeignVar,
    #[error("{0}")]
    Contract(&'static str),
}

pub type Result<T> = core::result::Result<T, AutodiffError>;

/// Handle to a tensor in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A trainable tensor with its accumulated gradient. The two always share a shape.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffTensor {
    name: String,
    value: Matrix,
    grad: Matrix,
}

impl DiffTensor {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Self { name: name.into(), value, grad }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Matrix {
        &self.value
    }

    pub fn grad(&self) -> &Matrix {
        &self.grad
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }

    /// Overwrites the value; panics if the shape would change.
    pub fn set_value(&mut self, value: Matrix) {
        assert_eq!(value.shape(), self.value.shape(), "parameter shape is fixed");
        self.value = value;
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut Matrix, &Matrix) {
        (&mut self.value, &self.grad)
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Owns every trainable tensor of a model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    tensors: Vec<DiffTensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        self.tensors.push(DiffTensor::new(name, value));
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &DiffTensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut DiffTensor {
        &mut self.tensors[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.tensors[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Matrix {
        &self.tensors[id.0].grad
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &DiffTensor> {
        self.tensors.iter()
    }

    pub fn tensors_mut(&mut self) -> &mut [DiffTensor] {
        &mut self.tensors
    }

    pub fn zero_grads(&mut self) {
        self.tensors.iter_mut().for_each(DiffTensor::zero_grad);
    }

    pub(crate) fn accumulate(&mut self, id: ParamId, grad: &Matrix) {
        self.tensors[id.0].grad.add_assign(grad);
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.value.is_finite() && t.grad.is_finite())
    }
}
