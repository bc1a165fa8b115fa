//! Reverse-mode automatic differentiation over dense 2-D `f64` tensors.
//!
//! Operations are recorded on a [`Tape`] as they are evaluated. Calling
//! [`Tape::backward`] on a scalar node walks the record in reverse and
//! accumulates vector-Jacobian products into every node that depends on a
//! trainable leaf.
//!
//! Every tensor is rank two. Scalars are `1×1`, vectors are `n×1` or `1×n`.
//! Elementwise binary operations broadcast any unit dimension.
//!
//! Domain code can register fused operations with hand-written adjoints
//! through [`CustomOp`].

mod error;
pub mod gradcheck;
mod tape;

pub use error::TapeError;
pub use tape::{CustomOp, Gradients, Tape, Var};

/// Dense tensor type used throughout the tape.
pub type Tensor = ndarray::Array2<f64>;

/// Builds a `1×1` tensor.
pub fn scalar(value: f64) -> Tensor {
    Tensor::from_elem((1, 1), value)
}
