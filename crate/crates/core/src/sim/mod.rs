//! Dense state-vector simulation of Pauli-rotation circuits.

mod measure;
mod pauli;
mod state;

pub use measure::{sample_pauli_measurement, sample_successes, shots_for_accuracy, ShotEstimate};
pub use pauli::{PauliAxis, PauliString};
pub use state::{bits_to_index, index_to_bits, QuantumState, MAX_QUBITS};
