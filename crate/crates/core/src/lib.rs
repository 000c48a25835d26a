//! Quantum-gated selective state-space forecaster for multivariate time series.
//!
//! A gate built from two independent single-qubit circuits (simulated as
//! statevectors) produces a scalar `g ∈ [g_min, g_max]` that blends the previous
//! hidden state with a layer-normalized projection of each input row. A small MLP
//! decodes the final state into a residual forecast on top of the last
//! observation.

pub mod backbone;
pub mod bench;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod decoder;
pub mod engine;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod linalg;
pub mod model;
pub mod parallel;
pub mod qgate;

pub use config::RunConfig;
pub use engine::{train, TrainConfig};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::{GateKind, Model, ModelDims};
