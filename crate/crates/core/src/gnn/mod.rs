//! Force-aware graph network: per-vertex and per-edge features, an
//! encode / message-passing / decode network recorded on the tape, and its
//! checkpoint format.

pub mod checkpoint;
pub mod features;
pub mod model;

pub use checkpoint::{fingerprint, Checkpoint, OptimizerState};
pub use features::{build_features, GraphFeatures, EDGE_WIDTH, NODE_WIDTH};
pub use model::{gnn_forward, gnn_forward_var, layout, record_params, GnnConfig, GnnOutput, GnnParams};
