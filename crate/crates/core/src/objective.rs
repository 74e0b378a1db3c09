//! Sample loss, empirical risk and the three gradient procedures.
//!
//! The loss of a labeled input is `1 − l · ⟨U† Σ_r U⟩`. For a gate
//! `exp(iθ G)` the derivative of the prediction is `−2 Im⟨ψ|U†Σ_r U_L…U_{k+1} G U_k…U_1|ψ⟩`,
//! which [`prediction_gradient`] evaluates for every gate with one forward
//! and one backward sweep.

use num_complex::Complex64;
use rand::Rng;

use crate::circuit::{AngleBinding, Circuit};
use crate::data::{LabeledDataset, LabeledSample};
use crate::error::{invalid, QnnError, Result};
use crate::sim::{sample_successes, QuantumState};

/// An input to the network: a classical string (encoded as `|z, 0⟩`) or an
/// arbitrary prepared state.
#[derive(Clone, Copy, Debug)]
pub enum Input<'a> {
    Bits(&'a [i8]),
    State(&'a QuantumState),
}

impl<'a> From<&'a QuantumState> for Input<'a> {
    fn from(s: &'a QuantumState) -> Self {
        Input::State(s)
    }
}

/// Gradient of a loss with respect to the circuit parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientVector(pub Vec<f64>);

impl GradientVector {
    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn scaled(mut self, factor: f64) -> Self {
        for g in &mut self.0 {
            *g *= factor;
        }
        self
    }
}

fn check_label(label: f64) -> Result<()> {
    if label == 1.0 || label == -1.0 {
        Ok(())
    } else {
        Err(invalid(format!("label {label} is not ±1")))
    }
}

/// Predicted label value for an input.
pub fn predict(c: &Circuit, params: &[f64], input: Input<'_>) -> Result<f64> {
    match input {
        Input::Bits(bits) => c.predict_bits(params, bits),
        Input::State(s) => c.predict(params, s),
    }
}

/// Prediction and its exact derivative with respect to every parameter.
pub fn prediction_gradient(c: &Circuit, params: &[f64], input: Input<'_>) -> Result<(f64, Vec<f64>)> {
    match input {
        Input::Bits(bits) => {
            if let Some(reduced) = c.restrict_to_basis(bits)? {
                return sweep(&reduced, params, QuantumState::zero(1)?);
            }
            if let Some(found) = c.local_prediction_gradient(params, bits)? {
                return Ok(found);
            }
            sweep(c, params, c.basis_input(bits)?)
        }
        Input::State(s) => sweep(c, params, s.clone()),
    }
}

fn sweep(c: &Circuit, params: &[f64], mut phi: QuantumState) -> Result<(f64, Vec<f64>)> {
    c.apply(params, &mut phi)?;
    let obs = c.readout_observable();
    let value = phi.expectation_pauli(&obs)?;
    let mut lambda = phi.clone();
    lambda.apply_pauli(&obs)?;
    let mut grad = vec![0.0; c.num_params()];
    for g in c.gates().iter().rev() {
        let angle = g.angle(params);
        if let AngleBinding::Bound { param: k, scale } = g.binding() {
            let w = lambda.matrix_element(g.pauli(), g.control_mask(), &phi)?;
            grad[k] += -2.0 * w.im * scale;
        }
        g.apply_angle(&mut phi, -angle)?;
        g.apply_angle(&mut lambda, -angle)?;
    }
    Ok((value, grad))
}

/// `1 − l · prediction`, in `[0, 2]`.
pub fn loss(c: &Circuit, params: &[f64], input: Input<'_>, label: f64) -> Result<f64> {
    check_label(label)?;
    Ok(1.0 - label * predict(c, params, input)?)
}

pub fn sample_loss(c: &Circuit, params: &[f64], s: &LabeledSample) -> Result<f64> {
    loss(c, params, Input::Bits(&s.bits), s.label as f64)
}

/// Multiplicity-weighted mean sample loss.
pub fn empirical_risk(c: &Circuit, params: &[f64], ds: &LabeledDataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(QnnError::EmptyDataset);
    }
    let mut total = 0.0;
    for s in ds.samples() {
        total += s.multiplicity as f64 * sample_loss(c, params, s)?;
    }
    Ok(total / ds.total_multiplicity() as f64)
}

/// `1 − ½(⟨+|U†ΣU|+⟩ − ⟨−|U†ΣU|−⟩)` for the two label-class states.
pub fn batch_risk(c: &Circuit, params: &[f64], plus: &QuantumState, minus: &QuantumState) -> Result<f64> {
    let p = c.predict(params, plus)?;
    let m = c.predict(params, minus)?;
    Ok(1.0 - 0.5 * (p - m))
}

/// Batch risk and its gradient.
pub fn batch_risk_gradient(
    c: &Circuit,
    params: &[f64],
    plus: &QuantumState,
    minus: &QuantumState,
) -> Result<(f64, GradientVector)> {
    let (p, gp) = prediction_gradient(c, params, Input::State(plus))?;
    let (m, gm) = prediction_gradient(c, params, Input::State(minus))?;
    let grad = gp.iter().zip(&gm).map(|(a, b)| -0.5 * (a - b)).collect();
    Ok((1.0 - 0.5 * (p - m), GradientVector(grad)))
}

/// Loss and its analytic gradient for one labeled input.
pub fn loss_and_gradient(c: &Circuit, params: &[f64], input: Input<'_>, label: f64) -> Result<(f64, GradientVector)> {
    check_label(label)?;
    let (value, grad) = prediction_gradient(c, params, input)?;
    Ok((1.0 - label * value, GradientVector(grad).scaled(-label)))
}

pub fn grad_analytic(c: &Circuit, params: &[f64], s: &LabeledSample) -> Result<GradientVector> {
    Ok(loss_and_gradient(c, params, Input::Bits(&s.bits), s.label as f64)?.1)
}

/// Symmetric-difference gradient of the loss using exact expectations.
pub fn grad_finite_difference_input(
    c: &Circuit,
    params: &[f64],
    input: Input<'_>,
    label: f64,
    epsilon: f64,
) -> Result<GradientVector> {
    if !(epsilon > 0.0) {
        return Err(invalid("finite-difference epsilon must be positive"));
    }
    c.check_params(params)?;
    let mut shifted = params.to_vec();
    let mut grad = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        shifted[k] = params[k] + epsilon;
        let up = loss(c, &shifted, input, label)?;
        shifted[k] = params[k] - epsilon;
        let down = loss(c, &shifted, input, label)?;
        shifted[k] = params[k];
        grad.push((up - down) / (2.0 * epsilon));
    }
    Ok(GradientVector(grad))
}

pub fn grad_finite_difference(c: &Circuit, params: &[f64], s: &LabeledSample, epsilon: f64) -> Result<GradientVector> {
    grad_finite_difference_input(c, params, Input::Bits(&s.bits), s.label as f64, epsilon)
}

/// Result of the ancilla interference protocol for one gradient component.
#[derive(Clone, Debug, PartialEq)]
pub struct HadamardEstimate {
    /// Estimated `d loss / dθ_k`.
    pub gradient: f64,
    /// Per generator term: estimated probability of reading the ancilla as 0.
    pub prob_zero: Vec<f64>,
    /// Per generator term: the exact probability.
    pub exact_prob_zero: Vec<f64>,
    /// Shots per term; 0 means exact probabilities were used.
    pub shots: u64,
}

/// Estimates `d loss/dθ_k` by simulating the Hadamard test on an extra
/// ancilla qubit: prepare `|ψ⟩(|0⟩+|1⟩)/√2`, apply `i𝒰` controlled on the
/// ancilla, Hadamard the ancilla and read it out. `P(0) = ½ − ½ Im⟨ψ|𝒰|ψ⟩`.
///
/// A gate with controls has generator `P_C Σ`, which is expanded into the
/// `2^|C|` Pauli strings `± Z_T Σ / 2^|C|`; each is measured separately.
/// With `shots == 0` the exact probabilities are used.
pub fn grad_hadamard_test<R: Rng + ?Sized>(
    c: &Circuit,
    params: &[f64],
    input: Input<'_>,
    label: f64,
    k: usize,
    shots: u64,
    rng: &mut R,
) -> Result<HadamardEstimate> {
    check_label(label)?;
    c.check_params(params)?;
    if k >= c.num_params() {
        return Err(invalid(format!("parameter {k} out of range")));
    }
    let bound: Vec<usize> = c.gates_bound_to(k).map(|(i, _)| i).collect();
    let gate_index = match bound.as_slice() {
        [i] => *i,
        [] => {
            return Ok(HadamardEstimate {
                gradient: 0.0,
                prob_zero: vec![],
                exact_prob_zero: vec![],
                shots,
            })
        }
        _ => return Err(invalid(format!("parameter {k} binds {} gates", bound.len()))),
    };
    let gate = &c.gates()[gate_index];
    let AngleBinding::Bound { scale, .. } = gate.binding() else {
        unreachable!("gates_bound_to yields bound gates")
    };

    let psi = match input {
        Input::Bits(bits) => c.basis_input(bits)?,
        Input::State(s) => {
            c.check_state(s)?;
            s.clone()
        }
    };
    let width = c.num_qubits() + 1;
    let anc = 1u64 << (width - 1);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let start = psi.with_appended_qubit(Complex64::new(r, 0.0), Complex64::new(r, 0.0))?;
    let obs = c.readout_observable();

    let controls = gate.control_mask();
    let m = controls.count_ones();
    let control_bits: Vec<u64> = (0..64).filter(|b| controls >> b & 1 == 1).map(|b| 1u64 << b).collect();

    let mut im_total = 0.0;
    let mut prob_zero = Vec::new();
    let mut exact_prob_zero = Vec::new();
    for subset in 0u64..(1u64 << m) {
        let mut z_mask = 0u64;
        for (i, bit) in control_bits.iter().enumerate() {
            if subset >> i & 1 == 1 {
                z_mask |= bit;
            }
        }
        let weight = if subset.count_ones() % 2 == 0 { 1.0 } else { -1.0 } / (1u64 << m) as f64;
        let sigma = gate.pauli().with_z_on(z_mask)?;

        let mut s = start.clone();
        for g in &c.gates()[..=gate_index] {
            s.apply_pauli_rotation_controlled(g.pauli(), g.control_mask() | anc, g.angle(params))?;
        }
        s.apply_pauli_controlled(&sigma, anc)?;
        for g in &c.gates()[gate_index + 1..] {
            s.apply_pauli_rotation_controlled(g.pauli(), g.control_mask() | anc, g.angle(params))?;
        }
        s.apply_pauli_controlled(&obs, anc)?;
        for g in c.gates().iter().rev() {
            s.apply_pauli_rotation_controlled(g.pauli(), g.control_mask() | anc, -g.angle(params))?;
        }
        s.scale_where(anc, Complex64::new(0.0, 1.0))?;
        s.apply_hadamard(width)?;
        let exact = s.prob_zero(width)?;
        let estimate = if shots == 0 {
            exact
        } else {
            sample_successes(exact, shots, rng) as f64 / shots as f64
        };
        exact_prob_zero.push(exact);
        prob_zero.push(estimate);
        im_total += weight * (1.0 - 2.0 * estimate);
    }
    // d pred / dθ = −2 scale Im⟨𝒰⟩,  d loss / dθ = −l · d pred / dθ
    Ok(HadamardEstimate {
        gradient: 2.0 * label * scale * im_total,
        prob_zero,
        exact_prob_zero,
        shots,
    })
}

/// `cos(2 Σ θ_j b_j)` with `b_j = (1 − z_j)/2`.
pub fn parity_expectation_oracle(thetas: &[f64], z: &[i8]) -> Result<f64> {
    if thetas.len() != z.len() {
        return Err(QnnError::DimensionMismatch {
            expected: thetas.len(),
            found: z.len(),
        });
    }
    let phase: f64 = thetas
        .iter()
        .zip(z)
        .map(|(t, &zj)| if zj == -1 { *t } else { 0.0 })
        .sum();
    Ok((2.0 * phase).cos())
}

/// Full-set parity risk `1 − cos(Σθ) ∏ sin θ_j`, valid for `n ≡ 0 (mod 4)`.
pub fn parity_risk_oracle(thetas: &[f64]) -> Result<f64> {
    if thetas.is_empty() || !thetas.len().is_multiple_of(4) {
        return Err(invalid(format!(
            "closed-form parity risk needs n a positive multiple of 4, got {}",
            thetas.len()
        )));
    }
    let sum: f64 = thetas.iter().sum();
    let prod: f64 = thetas.iter().map(|t| t.sin()).product();
    Ok(1.0 - sum.cos() * prod)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_random_circuit, Gate, GateKind, Placement};
    use crate::compiler::{subset_parity_circuit, SubsetSpec};
    use crate::sim::{index_to_bits, PauliAxis, PauliString};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn sample(bits: Vec<i8>, label: i8) -> LabeledSample {
        LabeledSample::new(bits, label, 1).unwrap()
    }

    fn single_x_circuit() -> Circuit {
        let mut c = Circuit::new(2, 1).unwrap();
        c.push(Gate::bound(PauliString::single(2, PauliAxis::X).unwrap(), 0, 1.0))
            .unwrap();
        c
    }

    #[test]
    fn empty_circuit_loss_is_one() {
        let c = Circuit::new(3, 0).unwrap();
        for idx in 0..4 {
            for label in [1, -1] {
                let s = sample(index_to_bits(idx, 2), label);
                assert_eq!(sample_loss(&c, &[], &s).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn single_gate_derivative() {
        // ⟨Y⟩ = sin 2θ, so d loss/dθ at 0 is −2 l.
        let c = single_x_circuit();
        for label in [1i8, -1] {
            let s = sample(vec![1], label);
            let g = grad_analytic(&c, &[0.0], &s).unwrap();
            assert!((g.0[0] + 2.0 * label as f64).abs() < 1e-12);
            let fd = grad_finite_difference(&c, &[0.0], &s, 1e-4).unwrap();
            assert!((fd.0[0] + 2.0 * label as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn unused_parameter_has_zero_gradient() {
        let mut c = single_x_circuit();
        c.push_new_param(PauliString::single(1, PauliAxis::Z).unwrap(), 1.0)
            .unwrap();
        let mut c2 = Circuit::new(2, 2).unwrap();
        c2.push(c.gates()[0].clone()).unwrap();
        let s = sample(vec![-1], 1);
        let g = grad_analytic(&c2, &[0.3, 0.9], &s).unwrap();
        assert_eq!(g.0[1], 0.0);
        let fd = grad_finite_difference(&c2, &[0.3, 0.9], &s, 1e-4).unwrap();
        assert_eq!(fd.0[1], 0.0);
        assert!(grad_finite_difference(&c2, &[0.3, 0.9], &s, 0.0).is_err());
    }

    #[test]
    fn analytic_matches_fd_on_random_circuits() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let n = 1 + trial % 4;
            let c = build_random_circuit(n, 12, &GateKind::ALL, Placement::Anywhere, &mut rng).unwrap();
            let params: Vec<f64> = (0..c.num_params()).map(|_| rng.gen_range(-PI..PI)).collect();
            let bits: Vec<i8> = (0..n).map(|_| if rng.gen() { 1 } else { -1 }).collect();
            let s = sample(bits, if rng.gen() { 1 } else { -1 });
            let a = grad_analytic(&c, &params, &s).unwrap();
            let f = grad_finite_difference(&c, &params, &s, 1e-4).unwrap();
            for (x, y) in a.0.iter().zip(&f.0) {
                assert!((x - y).abs() < 1e-6);
                assert!(x.abs() <= 2.0 + 1e-9);
            }
        }
    }

    #[test]
    fn hadamard_exact_matches_analytic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = build_random_circuit(3, 10, &GateKind::ALL, Placement::Anywhere, &mut rng).unwrap();
        let params: Vec<f64> = (0..10).map(|_| rng.gen_range(-PI..PI)).collect();
        let s = sample(vec![1, -1, -1], -1);
        let a = grad_analytic(&c, &params, &s).unwrap();
        for k in 0..10 {
            let h = grad_hadamard_test(&c, &params, Input::Bits(&s.bits), -1.0, k, 0, &mut rng).unwrap();
            assert!((h.gradient - a.0[k]).abs() < 1e-10, "{k}");
        }
        assert!(grad_hadamard_test(&c, &params, Input::Bits(&s.bits), -1.0, 10, 0, &mut rng).is_err());
    }

    #[test]
    fn hadamard_handles_controlled_generators() {
        let spec = SubsetSpec::new(3, vec![1, 3]).unwrap();
        let c = subset_parity_circuit(&spec, true).unwrap();
        let params = [0.4, 1.2, -0.7];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for idx in 0..8 {
            let bits = index_to_bits(idx, 3);
            let (_, g) = loss_and_gradient(&c, &params, Input::Bits(&bits), 1.0).unwrap();
            for k in 0..3 {
                let h = grad_hadamard_test(&c, &params, Input::Bits(&bits), 1.0, k, 0, &mut rng).unwrap();
                assert!((h.gradient - g.0[k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn hadamard_zero_imaginary_part() {
        // Identity-angle circuit with Σ = Y on the readout: 𝒰 = Y·Y = 1, Im = 0.
        let mut c = Circuit::new(2, 1).unwrap();
        c.push(Gate::bound(PauliString::single(2, PauliAxis::Y).unwrap(), 0, 1.0))
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let h = grad_hadamard_test(&c, &[0.0], Input::Bits(&[1]), 1.0, 0, 0, &mut rng).unwrap();
        assert!((h.exact_prob_zero[0] - 0.5).abs() < 1e-15);
        assert!(h.gradient.abs() < 1e-15);
    }

    #[test]
    fn parity_oracles() {
        assert_eq!(parity_expectation_oracle(&[0.0, 0.0], &[-1, 1]).unwrap(), 1.0);
        assert!((parity_expectation_oracle(&[FRAC_PI_2, FRAC_PI_2], &[-1, -1]).unwrap() - 1.0).abs() < 1e-15);
        assert!((parity_expectation_oracle(&[FRAC_PI_2], &[-1]).unwrap() + 1.0).abs() < 1e-15);
        assert!(parity_risk_oracle(&[FRAC_PI_2; 4]).unwrap().abs() < 1e-15);
        assert_eq!(parity_risk_oracle(&[0.0; 8]).unwrap(), 1.0);
        assert!(parity_risk_oracle(&[0.1; 6]).is_err());
        assert!(parity_expectation_oracle(&[0.1], &[1, 1]).is_err());
    }

    #[test]
    fn optimal_parity_is_stationary() {
        let spec = SubsetSpec::full(4);
        let c = subset_parity_circuit(&spec, true).unwrap();
        let ds = crate::data::exhaustive_dataset(4, |z| Ok(crate::compiler::parity_label(&spec, z))).unwrap();
        let params = [FRAC_PI_2; 4];
        assert!(empirical_risk(&c, &params, &ds).unwrap().abs() < 1e-12);
        let mut total = [0.0; 4];
        for s in ds.samples() {
            for (t, g) in total.iter_mut().zip(grad_analytic(&c, &params, s).unwrap().0) {
                *t += g / 16.0;
            }
        }
        assert!(total.iter().all(|g| g.abs() < 1e-10));
        let risk0 = empirical_risk(&c, &[0.0; 4], &ds).unwrap();
        assert!((risk0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn batch_risk_of_empty_circuit() {
        let c = Circuit::new(3, 0).unwrap();
        let plus = QuantumState::basis_state(&[1, 1], true).unwrap();
        let minus = QuantumState::basis_state(&[-1, 1], true).unwrap();
        assert_eq!(batch_risk(&c, &[], &plus, &minus).unwrap(), 1.0);
        assert!(batch_risk(&c, &[], &plus, &QuantumState::zero(2).unwrap()).is_err());
    }
}
