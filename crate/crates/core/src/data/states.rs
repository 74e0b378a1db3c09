use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;

use super::LabeledDataset;
use crate::error::{invalid, QnnError, Result};
use crate::sim::{bits_to_index, QuantumState};

/// How repeated strings contribute to a batch state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Amplitude proportional to multiplicity.
    #[default]
    Multiplicity,
    /// Amplitude proportional to the square root of multiplicity, so each
    /// string is measured with its empirical frequency.
    Frequency,
    Uniform,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SuperpositionSpec {
    /// Per-string phase `φ_z`; strings not listed get 0.
    pub phases: BTreeMap<Vec<i8>, f64>,
    pub weighting: Weighting,
}

/// `N Σ_z w_z e^{iφ_z} |z⟩ ⊗ |0⟩` over the samples labeled `label`.
pub fn build_superposition(ds: &LabeledDataset, label: i8, spec: &SuperpositionSpec) -> Result<QuantumState> {
    if spec.phases.values().any(|p| !p.is_finite()) {
        return Err(invalid("phases must be finite"));
    }
    let n = ds.n();
    if n + 1 > crate::sim::MAX_QUBITS {
        return Err(invalid("dataset too wide for a batch state"));
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << (n + 1)];
    let mut any = false;
    for s in ds.samples().iter().filter(|s| s.label == label) {
        any = true;
        let weight = match spec.weighting {
            Weighting::Multiplicity => s.multiplicity as f64,
            Weighting::Frequency => (s.multiplicity as f64).sqrt(),
            Weighting::Uniform => 1.0,
        };
        let phase = spec.phases.get(&s.bits).copied().unwrap_or(0.0);
        amps[bits_to_index(&s.bits)?] += Complex64::from_polar(weight, phase);
    }
    if !any {
        return Err(QnnError::EmptyDataset);
    }
    QuantumState::from_unnormalized(amps)
}

/// A product state `⊗_k exp(iφ_k Y)|+⟩` with the readout appended in `|0⟩`.
#[derive(Clone, Debug)]
pub struct ProductState {
    pub angles: Vec<f64>,
    pub state: QuantumState,
}

impl ProductState {
    pub fn from_angles(angles: Vec<f64>) -> Result<Self> {
        let n = angles.len();
        if n == 0 || n + 1 > crate::sim::MAX_QUBITS {
            return Err(invalid("product states need 1..MAX_QUBITS-1 data qubits"));
        }
        // exp(iφY)|+⟩ = ((cos φ + sin φ)|0⟩ + (cos φ − sin φ)|1⟩)/√2
        let factors: Vec<[f64; 2]> = angles
            .iter()
            .map(|&phi| {
                let (s, c) = phi.sin_cos();
                [(c + s) / std::f64::consts::SQRT_2, (c - s) / std::f64::consts::SQRT_2]
            })
            .collect();
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << (n + 1)];
        for (x, a) in amps.iter_mut().take(1 << n).enumerate() {
            let mut v = 1.0;
            for (k, f) in factors.iter().enumerate() {
                v *= f[x >> k & 1];
            }
            *a = Complex64::new(v, 0.0);
        }
        Ok(Self {
            angles,
            state: QuantumState::from_amplitudes(amps)?,
        })
    }

    /// `⟨Z_k⟩ = sin 2φ_k`.
    pub fn z_expectation(&self, qubit: usize) -> f64 {
        (2.0 * self.angles[qubit - 1]).sin()
    }
}

/// Prepared input states with ±1 labels.
#[derive(Clone, Debug, Default)]
pub struct LabeledStates {
    pub states: Vec<QuantumState>,
    pub labels: Vec<i8>,
}

impl LabeledStates {
    pub fn push(&mut self, state: QuantumState, label: i8) -> Result<()> {
        if label != 1 && label != -1 {
            return Err(invalid(format!("label {label} is not ±1")));
        }
        self.states.push(state);
        self.labels.push(label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Angles drawn uniformly from `[0, 2π)`.
pub fn random_product_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ProductState> {
    ProductState::from_angles((0..n).map(|_| rng.gen_range(0.0..TAU)).collect())
}
