//! Differentiable quasi-static garment draping.
//!
//! A garment mesh is placed around a signed-distance body, optionally
//! refined by a force-aware graph network, relaxed by an explicit solver
//! on StVK membrane, discrete-shell bending and gravity forces, and finally
//! pushed out of the body. Every stage can be recorded on a [`difftape`]
//! tape so the physical energy of the result can train the network and the
//! solver parameters end to end.

pub mod body;
mod error;
pub mod forces;
pub mod geom;
pub mod gradcheck;
pub mod gnn;
pub mod mesh;
pub mod pipeline;
pub mod rest;
pub mod solver;
pub mod train;

pub use error::{DrapeError, Result};
