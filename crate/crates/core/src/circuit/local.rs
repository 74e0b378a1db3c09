//! Basis-input evaluation for circuits whose gates are all `P_j X_r` with a
//! single-qubit data factor `P_j` (or `X_r` alone), read out with `Y_r`.
//!
//! Such gates on different data qubits commute, and `X_r` commutes with all of
//! them, so on the `X_r = s` eigenspace the circuit is `⊗_j W_j(s)`. With the
//! readout starting in `|0⟩` the prediction is `Im A`, where
//! `A = ∏_j ⟨z_j| W_j(−)† W_j(+) |z_j⟩` and `W_j(−)† W_j(+)` is the palindrome
//! `G_1 ⋯ G_m G_m ⋯ G_1` of the gates `G = exp(iθ P_j)` on qubit `j`.

use num_complex::Complex64;

use super::{AngleBinding, Circuit};
use crate::sim::PauliAxis;

type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

fn pauli(axis: PauliAxis) -> Mat2 {
    match axis {
        PauliAxis::X => [[ZERO, ONE], [ONE, ZERO]],
        PauliAxis::Y => [[ZERO, -I], [I, ZERO]],
        PauliAxis::Z => [[ONE, ZERO], [ZERO, -ONE]],
    }
}

/// `exp(iθP) = cos θ + i sin θ P`.
fn rotation(axis: PauliAxis, angle: f64) -> Mat2 {
    let (s, c) = angle.sin_cos();
    let p = pauli(axis);
    let mut out = [[ZERO; 2]; 2];
    for r in 0..2 {
        for k in 0..2 {
            let id = if r == k { c } else { 0.0 };
            out[r][k] = Complex64::new(id, 0.0) + I * s * p[r][k];
        }
    }
    out
}

/// Gate indices touching each data qubit, or `None` if the circuit is not of
/// the local readout form.
pub(super) struct LocalForm {
    per_qubit: Vec<Vec<(usize, PauliAxis)>>,
    readout_only: Vec<usize>,
}

impl LocalForm {
    pub(super) fn of(c: &Circuit) -> Option<Self> {
        if c.readout_axis != PauliAxis::Y || c.readout_qubit != c.num_qubits {
            return None;
        }
        let n = c.num_qubits - 1;
        let mut per_qubit = vec![Vec::new(); n];
        let mut readout_only = Vec::new();
        for (i, g) in c.gates.iter().enumerate() {
            if !g.controls.is_empty() || g.pauli.axis_on(c.readout_qubit) != Some(PauliAxis::X) {
                return None;
            }
            match g.pauli.terms() {
                [_] => readout_only.push(i),
                [(q, a), _] => per_qubit[q - 1].push((i, *a)),
                _ => return None,
            }
        }
        Some(Self {
            per_qubit,
            readout_only,
        })
    }

    /// Prediction and, when `grad` is given, its derivative with respect to
    /// every parameter (accumulated into `grad`).
    pub(super) fn evaluate(&self, c: &Circuit, params: &[f64], bits: &[i8], grad: Option<&mut [f64]>) -> f64 {
        let n = self.per_qubit.len();
        // factor and its derivative per gate, for each qubit
        let mut factors = Vec::with_capacity(n + 1);
        let mut derivs: Vec<Vec<(usize, Complex64)>> = Vec::with_capacity(n + 1);
        for (j, gates) in self.per_qubit.iter().enumerate() {
            let z = if bits[j] == 1 { 0 } else { 1 };
            let m = gates.len();
            let seq: Vec<Mat2> = gates
                .iter()
                .chain(gates.iter().rev())
                .map(|&(i, a)| rotation(a, c.gates[i].angle(params)))
                .collect();
            // prefix[k] = seq[0..k], suffix[k] = seq[k..]
            let mut prefix = vec![[[ONE, ZERO], [ZERO, ONE]]; 2 * m + 1];
            for k in 0..2 * m {
                prefix[k + 1] = mul(&prefix[k], &seq[k]);
            }
            factors.push(prefix[2 * m][z][z]);
            let mut d = Vec::new();
            if grad.is_some() {
                let mut suffix = vec![[[ONE, ZERO], [ZERO, ONE]]; 2 * m + 1];
                for k in (0..2 * m).rev() {
                    suffix[k] = mul(&seq[k], &suffix[k + 1]);
                }
                for (k, &(i, a)) in gates.iter().enumerate() {
                    let p = pauli(a);
                    let mut total = ZERO;
                    for pos in [k, 2 * m - 1 - k] {
                        let left = mul(&prefix[pos], &p);
                        let full = mul(&left, &suffix[pos]);
                        total += I * full[z][z];
                    }
                    d.push((i, total));
                }
            }
            derivs.push(d);
        }
        // readout-only gates exp(iφX_r) contribute e^{2iφ}
        let phase: f64 = self.readout_only.iter().map(|&i| 2.0 * c.gates[i].angle(params)).sum();
        let common = Complex64::from_polar(1.0, phase);
        let product: Complex64 = factors.iter().product::<Complex64>() * common;

        if let Some(grad) = grad {
            // products of all factors except qubit j
            let mut left = vec![ONE; n + 1];
            for j in 0..n {
                left[j + 1] = left[j] * factors[j];
            }
            let mut right = vec![ONE; n + 1];
            for j in (0..n).rev() {
                right[j] = right[j + 1] * factors[j];
            }
            for (j, d) in derivs.iter().enumerate() {
                let others = left[j] * right[j + 1] * common;
                for &(i, da) in d {
                    if let AngleBinding::Bound { param, scale } = c.gates[i].binding {
                        grad[param] += (others * da).im * scale;
                    }
                }
            }
            for &i in &self.readout_only {
                if let AngleBinding::Bound { param, scale } = c.gates[i].binding {
                    grad[param] += (2.0 * I * product).im * scale;
                }
            }
        }
        product.im
    }
}
