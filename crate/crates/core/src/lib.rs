//! Shadow-based variational solver for quantum linear systems, together with a
//! Hadamard-test baseline, the benchmark problem families and the
//! circuit-count models, all running on a dense state-vector simulator.

pub mod ansatz;
pub mod cost;
pub mod error;
pub mod matrix;
pub mod pauli;
pub mod problems;
pub mod shadow;
pub mod solver;
pub mod state;
pub mod vqls;

pub use error::{Error, Result};
pub use matrix::ComplexMatrix;
pub use pauli::{decompose_dense, Pauli, PauliString, PauliSum, Phase};
pub use state::{Gate, StateVector};
