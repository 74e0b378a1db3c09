//! Parameterized circuits of Pauli rotations with a single readout qubit.
//!
//! A circuit is an ordered list of gates `exp(iθΣ)`, optionally conditioned
//! on a set of control qubits being `|1⟩`. Gate 0 acts first, so the list
//! order is the right-to-left order of the operator product.

mod builders;
mod io;
mod local;

pub use builders::{build_layered_readout_circuit, build_random_circuit, GateKind, LayerKind, Placement};

use crate::error::{invalid, QnnError, Result};
use crate::sim::{PauliAxis, PauliString, QuantumState};

/// How a gate obtains its rotation angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AngleBinding {
    Fixed(f64),
    /// `angle = scale * params[param]`
    Bound {
        param: usize,
        scale: f64,
    },
}

impl AngleBinding {
    pub fn angle(&self, params: &[f64]) -> f64 {
        match *self {
            AngleBinding::Fixed(a) => a,
            AngleBinding::Bound { param, scale } => scale * params[param],
        }
    }

    pub fn param(&self) -> Option<usize> {
        match *self {
            AngleBinding::Fixed(_) => None,
            AngleBinding::Bound { param, .. } => Some(param),
        }
    }
}

/// One rotation `exp(iθ P_C Σ)` where `P_C` projects the control qubits onto `|1⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pauli: PauliString,
    controls: Vec<usize>,
    control_mask: u64,
    binding: AngleBinding,
}

impl Gate {
    pub fn new(pauli: PauliString, binding: AngleBinding) -> Self {
        Self {
            pauli,
            controls: Vec::new(),
            control_mask: 0,
            binding,
        }
    }

    pub fn fixed(pauli: PauliString, angle: f64) -> Self {
        Self::new(pauli, AngleBinding::Fixed(angle))
    }

    pub fn bound(pauli: PauliString, param: usize, scale: f64) -> Self {
        Self::new(pauli, AngleBinding::Bound { param, scale })
    }

    /// Conditions the rotation on every listed qubit (1-based) being `|1⟩`.
    pub fn with_controls(mut self, mut controls: Vec<usize>) -> Result<Self> {
        controls.sort_unstable();
        controls.dedup();
        let mut mask = 0u64;
        for &q in &controls {
            if q == 0 || q > 63 {
                return Err(invalid(format!("control qubit {q} out of range")));
            }
            mask |= 1 << (q - 1);
        }
        if mask & self.pauli.support_mask() != 0 {
            return Err(invalid("control qubits overlap the Pauli support"));
        }
        self.controls = controls;
        self.control_mask = mask;
        Ok(self)
    }

    pub fn pauli(&self) -> &PauliString {
        &self.pauli
    }

    pub fn controls(&self) -> &[usize] {
        &self.controls
    }

    pub fn control_mask(&self) -> u64 {
        self.control_mask
    }

    pub fn binding(&self) -> AngleBinding {
        self.binding
    }

    pub fn angle(&self, params: &[f64]) -> f64 {
        self.binding.angle(params)
    }

    fn max_qubit(&self) -> usize {
        self.pauli.max_qubit().max(self.controls.last().copied().unwrap_or(0))
    }

    /// Applies the gate with angle `angle` (ignoring the binding).
    pub(crate) fn apply_angle(&self, state: &mut QuantumState, angle: f64) -> Result<()> {
        state.apply_pauli_rotation_controlled(&self.pauli, self.control_mask, angle)
    }
}

/// A readout circuit on `num_qubits` qubits with `num_params` free parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    num_qubits: usize,
    readout_qubit: usize,
    readout_axis: PauliAxis,
    gates: Vec<Gate>,
    num_params: usize,
}

impl Circuit {
    /// Empty circuit whose readout is the last qubit, measured along `Y`.
    pub fn new(num_qubits: usize, num_params: usize) -> Result<Self> {
        Self::with_readout(num_qubits, num_qubits, PauliAxis::Y, num_params)
    }

    pub fn with_readout(
        num_qubits: usize,
        readout_qubit: usize,
        readout_axis: PauliAxis,
        num_params: usize,
    ) -> Result<Self> {
        if num_qubits == 0 || num_qubits > crate::sim::MAX_QUBITS {
            return Err(invalid(format!("circuit width {num_qubits} out of range")));
        }
        if readout_qubit == 0 || readout_qubit > num_qubits {
            return Err(QnnError::QubitOutOfRange {
                qubit: readout_qubit,
                num_qubits,
            });
        }
        Ok(Self {
            num_qubits,
            readout_qubit,
            readout_axis,
            gates: Vec::new(),
            num_params,
        })
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        if gate.max_qubit() > self.num_qubits {
            return Err(QnnError::QubitOutOfRange {
                qubit: gate.max_qubit(),
                num_qubits: self.num_qubits,
            });
        }
        if let Some(k) = gate.binding.param() {
            if k >= self.num_params {
                return Err(invalid(format!(
                    "gate bound to parameter {k} but circuit has {}",
                    self.num_params
                )));
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    /// Appends a gate bound to a fresh parameter and returns its index.
    pub fn push_new_param(&mut self, pauli: PauliString, scale: f64) -> Result<usize> {
        let k = self.num_params;
        self.num_params += 1;
        if let Err(e) = self.push(Gate::bound(pauli, k, scale)) {
            self.num_params -= 1;
            return Err(e);
        }
        Ok(k)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// Number of data qubits (all but the readout).
    pub fn num_data_qubits(&self) -> usize {
        self.num_qubits - 1
    }

    pub fn readout_qubit(&self) -> usize {
        self.readout_qubit
    }

    pub fn readout_axis(&self) -> PauliAxis {
        self.readout_axis
    }

    pub fn set_readout_axis(&mut self, axis: PauliAxis) {
        self.readout_axis = axis;
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    /// The measured operator on the readout qubit.
    pub fn readout_observable(&self) -> PauliString {
        PauliString::single(self.readout_qubit, self.readout_axis).expect("readout qubit validated at construction")
    }

    pub(crate) fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params {
            return Err(QnnError::ParamCount {
                expected: self.num_params,
                found: params.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_state(&self, state: &QuantumState) -> Result<()> {
        if state.num_qubits() != self.num_qubits {
            return Err(QnnError::DimensionMismatch {
                expected: self.num_qubits,
                found: state.num_qubits(),
            });
        }
        Ok(())
    }

    /// `|ψ⟩ → U(θ)|ψ⟩`.
    pub fn apply(&self, params: &[f64], state: &mut QuantumState) -> Result<()> {
        self.check_params(params)?;
        self.check_state(state)?;
        for g in &self.gates {
            g.apply_angle(state, g.angle(params))?;
        }
        Ok(())
    }

    /// `|ψ⟩ → U(θ)†|ψ⟩`.
    pub fn apply_inverse(&self, params: &[f64], state: &mut QuantumState) -> Result<()> {
        self.check_params(params)?;
        self.check_state(state)?;
        for g in self.gates.iter().rev() {
            g.apply_angle(state, -g.angle(params))?;
        }
        Ok(())
    }

    /// Predicted label value `⟨ψ|U† Σ_readout U|ψ⟩`.
    pub fn predict(&self, params: &[f64], input: &QuantumState) -> Result<f64> {
        let mut state = input.clone();
        self.apply(params, &mut state)?;
        state.expectation_pauli(&self.readout_observable())
    }

    /// Prediction for the basis input `|z, 0_readout⟩`. Data-diagonal
    /// circuits reduce to one qubit and circuits of single-data-qubit `P X_r`
    /// gates factor per qubit; anything else runs on the full register.
    pub fn predict_bits(&self, params: &[f64], bits: &[i8]) -> Result<f64> {
        self.check_params(params)?;
        if let Some(reduced) = self.restrict_to_basis(bits)? {
            return reduced.predict(params, &QuantumState::zero(1)?);
        }
        if let Some(local) = local::LocalForm::of(self) {
            crate::sim::bits_to_index(bits)?;
            return Ok(local.evaluate(self, params, bits, None));
        }
        self.predict(params, &self.basis_input(bits)?)
    }

    /// True when every gate is `P_j X_r` on one data qubit (or `X_r`), with no
    /// controls and a `Y` readout on the last qubit.
    pub fn is_readout_local(&self) -> bool {
        local::LocalForm::of(self).is_some()
    }

    /// Prediction and parameter gradient for a basis input via the per-qubit
    /// factorization; `None` when [`is_readout_local`](Self::is_readout_local) fails.
    pub(crate) fn local_prediction_gradient(&self, params: &[f64], bits: &[i8]) -> Result<Option<(f64, Vec<f64>)>> {
        self.check_params(params)?;
        self.check_basis_layout(bits)?;
        crate::sim::bits_to_index(bits)?;
        Ok(local::LocalForm::of(self).map(|local| {
            let mut grad = vec![0.0; self.num_params];
            let value = local.evaluate(self, params, bits, Some(&mut grad));
            (value, grad)
        }))
    }

    /// `|z⟩` with the readout appended in `|0⟩`.
    pub fn basis_input(&self, bits: &[i8]) -> Result<QuantumState> {
        self.check_basis_layout(bits)?;
        QuantumState::basis_state(bits, true)
    }

    fn check_basis_layout(&self, bits: &[i8]) -> Result<()> {
        if self.readout_qubit != self.num_qubits {
            return Err(invalid("basis-string inputs require the readout to be the last qubit"));
        }
        if bits.len() + 1 != self.num_qubits {
            return Err(QnnError::DimensionMismatch {
                expected: self.num_qubits - 1,
                found: bits.len(),
            });
        }
        Ok(())
    }

    /// True when every gate acts on data qubits only through `Z`.
    pub fn is_data_diagonal(&self) -> bool {
        self.gates.iter().all(|g| {
            g.pauli
                .terms()
                .iter()
                .all(|&(q, a)| q == self.readout_qubit || a == PauliAxis::Z)
        })
    }

    /// For a data-diagonal circuit and basis input `z`, the action reduces to
    /// a single-qubit circuit on the readout: each firing gate becomes
    /// `exp(i s θ P_r)` with `s = ∏ z_d` over its data `Z` factors. Gates whose
    /// controls are not satisfied, or that act only as a phase, are dropped.
    ///
    /// Returns `None` when the circuit is not reducible.
    pub fn restrict_to_basis(&self, bits: &[i8]) -> Result<Option<Circuit>> {
        self.check_basis_layout(bits)?;
        crate::sim::bits_to_index(bits)?;
        if !self.is_data_diagonal() || self.gates.iter().any(|g| g.controls.contains(&self.readout_qubit)) {
            return Ok(None);
        }
        let mut reduced = Circuit::with_readout(1, 1, self.readout_axis, self.num_params)?;
        for g in &self.gates {
            if g.controls.iter().any(|&q| bits[q - 1] == 1) {
                continue;
            }
            let mut sign = 1.0;
            let mut readout_axis = None;
            for &(q, a) in g.pauli.terms() {
                if q == self.readout_qubit {
                    readout_axis = Some(a);
                } else {
                    sign *= bits[q - 1] as f64;
                }
            }
            let Some(axis) = readout_axis else { continue };
            let binding = match g.binding {
                AngleBinding::Fixed(a) => AngleBinding::Fixed(sign * a),
                AngleBinding::Bound { param, scale } => AngleBinding::Bound {
                    param,
                    scale: sign * scale,
                },
            };
            reduced.gates.push(Gate::new(PauliString::single(1, axis)?, binding));
        }
        Ok(Some(reduced))
    }

    /// Gates bound to parameter `k`.
    pub fn gates_bound_to(&self, k: usize) -> impl Iterator<Item = (usize, &Gate)> {
        self.gates
            .iter()
            .enumerate()
            .filter(move |(_, g)| g.binding.param() == Some(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

    #[test]
    fn empty_circuit_is_identity() {
        let c = Circuit::new(3, 0).unwrap();
        let input = QuantumState::basis_state(&[1, -1], true).unwrap();
        let mut s = input.clone();
        c.apply(&[], &mut s).unwrap();
        assert_eq!(s, input);
        assert_eq!(c.predict(&[], &input).unwrap(), 0.0);
        assert!(c.is_data_diagonal());
    }

    #[test]
    fn fixed_quarter_turn_on_readout() {
        let mut c = Circuit::new(2, 0).unwrap();
        c.push(Gate::fixed(PauliString::single(2, PauliAxis::X).unwrap(), FRAC_PI_4))
            .unwrap();
        let mut s = QuantumState::basis_state(&[-1], true).unwrap();
        c.apply(&[], &mut s).unwrap();
        // data qubit in |1⟩ (index bit 0), readout (|0⟩ + i|1⟩)/√2
        assert!((s.amplitude(1) - Complex64::new(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((s.amplitude(3) - Complex64::new(0.0, FRAC_1_SQRT_2)).norm() < 1e-15);
        assert!((c.predict_bits(&[], &[-1]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        let mut c = Circuit::new(2, 1).unwrap();
        assert!(c
            .push(Gate::bound(PauliString::single(2, PauliAxis::X).unwrap(), 1, 1.0))
            .is_err());
        assert!(c
            .push(Gate::fixed(PauliString::single(3, PauliAxis::X).unwrap(), 1.0))
            .is_err());
        c.push(Gate::bound(PauliString::single(2, PauliAxis::X).unwrap(), 0, 1.0))
            .unwrap();
        let mut s = QuantumState::zero(2).unwrap();
        assert!(matches!(
            c.apply(&[], &mut s),
            Err(QnnError::ParamCount { expected: 1, found: 0 })
        ));
        let mut s3 = QuantumState::zero(3).unwrap();
        assert!(c.apply(&[0.1], &mut s3).is_err());
        assert!(Circuit::with_readout(2, 3, PauliAxis::Y, 0).is_err());
    }

    #[test]
    fn xx_is_not_diagonal() {
        let mut c = Circuit::new(2, 0).unwrap();
        c.push(Gate::fixed(PauliString::parse("X1 X2").unwrap(), 0.2)).unwrap();
        assert!(!c.is_data_diagonal());
        assert!(c.restrict_to_basis(&[1]).unwrap().is_none());
    }

    #[test]
    fn inverse_undoes_apply() {
        let mut c = Circuit::new(3, 2).unwrap();
        c.push(Gate::bound(PauliString::parse("X1 Y3").unwrap(), 0, 1.0))
            .unwrap();
        c.push(Gate::bound(PauliString::parse("Z2 X3").unwrap(), 1, -0.5))
            .unwrap();
        c.push(
            Gate::fixed(PauliString::parse("X3").unwrap(), 0.4)
                .with_controls(vec![1, 2])
                .unwrap(),
        )
        .unwrap();
        let input = QuantumState::basis_state(&[-1, 1], true).unwrap();
        let mut s = input.clone();
        c.apply(&[0.3, 1.1], &mut s).unwrap();
        c.apply_inverse(&[0.3, 1.1], &mut s).unwrap();
        for (a, b) in s.amplitudes().iter().zip(input.amplitudes()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn reduced_matches_dense() {
        let mut c = Circuit::new(4, 3).unwrap();
        c.push(Gate::fixed(PauliString::parse("X4").unwrap(), FRAC_PI_4))
            .unwrap();
        c.push(Gate::bound(PauliString::parse("Z1 X4").unwrap(), 0, 0.5))
            .unwrap();
        c.push(Gate::bound(PauliString::parse("Z1 Z3 Y4").unwrap(), 1, 1.0))
            .unwrap();
        c.push(Gate::bound(PauliString::parse("Z2").unwrap(), 2, 1.0)).unwrap();
        c.push(
            Gate::bound(PauliString::parse("X4").unwrap(), 2, -1.0)
                .with_controls(vec![2, 3])
                .unwrap(),
        )
        .unwrap();
        assert!(c.is_data_diagonal());
        let params = [0.7, -0.4, 1.3];
        for idx in 0..8 {
            let bits = crate::sim::index_to_bits(idx, 3);
            let dense = c.predict(&params, &c.basis_input(&bits).unwrap()).unwrap();
            let fast = c.predict_bits(&params, &bits).unwrap();
            assert!((dense - fast).abs() < 1e-12, "{idx}: {dense} vs {fast}");
        }
    }
}
