use rand::Rng;

use super::{PauliString, QuantumState};
use crate::error::{QnnError, Result};

/// Outcome counts from repeated ±1 measurements.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShotEstimate {
    pub mean: f64,
    pub shots: u64,
    pub outcomes_plus: u64,
}

impl ShotEstimate {
    pub fn from_counts(outcomes_plus: u64, shots: u64) -> Result<Self> {
        if shots == 0 {
            return Err(QnnError::ZeroShots);
        }
        let mean = (2.0 * outcomes_plus as f64 - shots as f64) / shots as f64;
        Ok(Self {
            mean,
            shots,
            outcomes_plus,
        })
    }

    /// Observed frequency of the `+1` outcome.
    pub fn frequency_plus(&self) -> f64 {
        self.outcomes_plus as f64 / self.shots as f64
    }
}

/// Number of successes in `shots` Bernoulli(`p`) trials.
pub fn sample_successes<R: Rng + ?Sized>(p: f64, shots: u64, rng: &mut R) -> u64 {
    let p = p.clamp(0.0, 1.0);
    (0..shots).filter(|_| rng.gen::<f64>() < p).count() as u64
}

/// Measures `Σ` `shots` times; each outcome is `+1` with probability `(1 + ⟨Σ⟩)/2`.
pub fn sample_pauli_measurement<R: Rng + ?Sized>(
    state: &QuantumState,
    p: &PauliString,
    shots: u64,
    rng: &mut R,
) -> Result<ShotEstimate> {
    if shots == 0 {
        return Err(QnnError::ZeroShots);
    }
    let exact = state.expectation_pauli(p)?;
    let plus = sample_successes((1.0 + exact) / 2.0, shots, rng);
    ShotEstimate::from_counts(plus, shots)
}

/// Shots needed for a `δ`-accurate estimate: `⌈2/δ²⌉`.
pub fn shots_for_accuracy(delta: f64) -> u64 {
    (2.0 / (delta * delta)).ceil() as u64
}
