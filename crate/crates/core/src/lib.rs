//! Simulation and training of quantum neural networks built from Pauli
//! rotations with a single readout qubit.

pub mod circuit;
pub mod compiler;
pub mod data;
mod error;
pub mod experiments;
pub mod objective;
pub mod sim;
pub mod trainer;

pub use error::{QnnError, Result};
