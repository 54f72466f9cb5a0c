//! Minimal dense-tensor numerics with reverse-mode gradients.
//!
//! All values are `f64`, row-major. Model code records operations on a
//! [`Tape`], calls [`Tape::backward`] on a scalar loss and hands the
//! resulting [`ParamGrads`] to an [`Adam`] optimizer.

mod gradcheck;
mod kernels;
mod optim;
mod params;
mod sparse;
mod tape;
mod tensor;

pub use gradcheck::{check_gradients, check_param_gradients, GradCheckReport};
pub use optim::{Adam, AdamConfig, OptimizerState};
pub use params::{glorot_uniform, ParamGrads, ParamId, ParamStore};
pub use sparse::SparseMatrix;
pub use tape::{causal_conv1d_seq, ConvLayout, Grads, Tape, Var};
pub use tensor::Tensor;

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NotScalarLoss(alloc::vec::Vec<usize>),
}

pub(crate) fn mismatch(op: &'static str, detail: String) -> NumError {
    NumError::ShapeMismatch { op, detail }
}
