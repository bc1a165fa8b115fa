use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TapeError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: [usize; 2],
        rhs: [usize; 2],
    },
    #[error("{op}: index {index} out of range for {len} rows")]
    Index {
        op: &'static str,
        index: usize,
        len: usize,
    },
    #[error("backward requires a 1x1 loss, got {shape:?}")]
    NonScalarLoss { shape: [usize; 2] },
    #[error("{op}: {msg}")]
    Contract { op: &'static str, msg: String },
}
