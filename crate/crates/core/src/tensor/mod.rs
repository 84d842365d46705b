//! Reverse-mode automatic differentiation over small dense `f64` arrays.
//!
//! Learned quantities live in [`Tensor`]s, usually grouped in a
//! [`ParamStore`]. A forward pass copies them into a [`Graph`] (the
//! computation record) as leaves, runs kernels that append nodes in
//! execution order, and [`Graph::backward`] walks the record once in reverse.
//! The resulting [`Gradients`] are folded back into the tensors' gradient
//! slots with [`ParamStore::accumulate`], and [`Adam`] consumes them.

mod adam;
mod graph;
mod init;
mod params;

pub use adam::{Adam, AdamConfig, AdamState};
pub use graph::{Gradients, Graph, Var};
pub use init::{bias, xavier_uniform};
pub use params::ParamStore;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("{kernel}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        kernel: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{kernel}: expected {expected}, got shape {shape:?}")]
    InvalidShape {
        kernel: &'static str,
        expected: &'static str,
        shape: Vec<usize>,
    },
    #[error("{values} values do not fill shape {shape:?}")]
    LengthMismatch { shape: Vec<usize>, values: usize },
    #[error("zero-sized dimension in shape {0:?}")]
    ZeroDimension(Vec<usize>),
    #[error("log: non-positive input {0}")]
    NonPositiveLog(f64),
    #[error("backward: loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("{kernel}: index {index} out of range for {len} rows")]
    IndexOutOfRange {
        kernel: &'static str,
        index: usize,
        len: usize,
    },
    #[error("adam: parameter {0} has no gradient")]
    MissingGradient(usize),
    #[error("adam: state has {state} slots but {params} parameters were given")]
    StateMismatch { state: usize, params: usize },
}

/// A shaped, row-major array with an optional gradient slot.
///
/// The gradient slot is only ever allocated for tensors created with
/// `track_grad` set.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
    grad: Option<Vec<f64>>,
    track_grad: bool,
}

pub(crate) fn checked_numel(shape: &[usize]) -> Result<usize, TensorError> {
    if shape.contains(&0) {
        return Err(TensorError::ZeroDimension(shape.to_vec()));
    }
    Ok(shape.iter().product())
}

impl Tensor {
    pub fn new(shape: &[usize], values: Vec<f64>) -> Result<Self, TensorError> {
        let numel = checked_numel(shape)?;
        if numel != values.len() {
            return Err(TensorError::LengthMismatch {
                shape: shape.to_vec(),
                values: values.len(),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            values,
            grad: None,
            track_grad: false,
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self, TensorError> {
        let numel = checked_numel(shape)?;
        Self::new(shape, vec![0.0; numel])
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: Vec::new(),
            values: vec![value],
            grad: None,
            track_grad: false,
        }
    }

    pub fn vector(values: Vec<f64>) -> Result<Self, TensorError> {
        Self::new(&[values.len()], values)
    }

    /// Marks the tensor as a gradient-tracked parameter.
    pub fn tracked(mut self) -> Self {
        self.track_grad = true;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_tracked(&self) -> bool {
        self.track_grad
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    /// Adds `delta` into the gradient slot, allocating it on first use.
    /// Untracked tensors ignore the call.
    pub fn accumulate_grad(&mut self, delta: &[f64]) -> Result<(), TensorError> {
        if !self.track_grad {
            return Ok(());
        }
        if delta.len() != self.values.len() {
            return Err(TensorError::ShapeMismatch {
                kernel: "accumulate_grad",
                lhs: self.shape.clone(),
                rhs: vec![delta.len()],
            });
        }
        let slot = self.grad.get_or_insert_with(|| vec![0.0; delta.len()]);
        for (s, d) in slot.iter_mut().zip(delta) {
            *s += d;
        }
        Ok(())
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    pub(crate) fn grad_mut(&mut self) -> Option<&mut Vec<f64>> {
        self.grad.as_mut()
    }
}
