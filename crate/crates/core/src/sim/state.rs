use num_complex::Complex64;

use super::pauli::PauliString;
use crate::error::{invalid, QnnError, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Largest register the dense simulator accepts.
pub const MAX_QUBITS: usize = 26;

#[inline]
fn parity_sign(k: usize, mask: u64) -> f64 {
    if ((k as u64) & mask).count_ones() & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Inserts a zero bit at position `pos`.
#[inline]
fn insert_zero(m: usize, pos: u32) -> usize {
    let low = m & ((1usize << pos) - 1);
    ((m >> pos) << (pos + 1)) | low
}

/// Dense pure state over `num_qubits` qubits.
///
/// Qubit `i` (1-based) occupies bit `i - 1` of the amplitude index, so qubit 1
/// is the least significant bit.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl QuantumState {
    /// `|0…0⟩` on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        Self::basis_index(0, num_qubits)
    }

    pub fn basis_index(index: usize, num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(invalid(format!("register width {num_qubits} outside 1..={MAX_QUBITS}")));
        }
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(invalid(format!("basis index {index} >= {dim}")));
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(Self { num_qubits, amps })
    }

    /// Computational basis state for a ±1 string: `+1 → |0⟩`, `−1 → |1⟩`.
    /// With `include_readout`, qubit `n + 1` is appended in `|0⟩`.
    pub fn basis_state(bits: &[i8], include_readout: bool) -> Result<Self> {
        if bits.is_empty() {
            return Err(invalid("empty bit string"));
        }
        let index = bits_to_index(bits)?;
        Self::basis_index(index, bits.len() + include_readout as usize)
    }

    /// Wraps amplitudes whose squared norm is 1 within `1e-10`.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let dim = amps.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(invalid(format!("amplitude count {dim} is not a power of two >= 2")));
        }
        let num_qubits = dim.trailing_zeros() as usize;
        if num_qubits > MAX_QUBITS {
            return Err(invalid("register too wide"));
        }
        let state = Self { num_qubits, amps };
        let err = (state.norm_sqr() - 1.0).abs();
        if err > 1e-10 {
            return Err(invalid(format!("state not normalized (|norm² − 1| = {err:e})")));
        }
        Ok(state)
    }

    /// Normalizes arbitrary non-zero amplitudes.
    pub fn from_unnormalized(mut amps: Vec<Complex64>) -> Result<Self> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(invalid("cannot normalize a zero or non-finite vector"));
        }
        for a in &mut amps {
            *a /= norm;
        }
        Self::from_amplitudes(amps)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Appends one qubit as the new most significant bit in state
    /// `amp0|0⟩ + amp1|1⟩` (which must be normalized).
    pub fn with_appended_qubit(&self, amp0: Complex64, amp1: Complex64) -> Result<Self> {
        if self.num_qubits + 1 > MAX_QUBITS {
            return Err(invalid("register too wide"));
        }
        let mut amps = Vec::with_capacity(self.dim() * 2);
        amps.extend(self.amps.iter().map(|a| a * amp0));
        amps.extend(self.amps.iter().map(|a| a * amp1));
        Ok(Self {
            num_qubits: self.num_qubits + 1,
            amps,
        })
    }

    fn check_mask(&self, mask: u64) -> Result<()> {
        if mask >> self.num_qubits != 0 {
            let qubit = 64 - mask.leading_zeros() as usize;
            return Err(QnnError::QubitOutOfRange {
                qubit,
                num_qubits: self.num_qubits,
            });
        }
        Ok(())
    }

    fn check_pauli(&self, p: &PauliString, controls: u64) -> Result<()> {
        self.check_mask(p.support_mask())?;
        self.check_mask(controls)?;
        if controls & p.support_mask() != 0 {
            return Err(invalid("control qubits overlap the Pauli support"));
        }
        Ok(())
    }

    /// `|ψ⟩ → Σ|ψ⟩`.
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<()> {
        self.apply_pauli_controlled(p, 0)
    }

    /// Applies `Σ` on the subspace where every qubit in `controls` is `|1⟩`.
    pub fn apply_pauli_controlled(&mut self, p: &PauliString, controls: u64) -> Result<()> {
        self.check_pauli(p, controls)?;
        let flip = p.flip_mask() as usize;
        let pm = p.phase_mask();
        let yph = p.y_phase();
        let c = controls as usize;
        if flip == 0 {
            for (k, a) in self.amps.iter_mut().enumerate() {
                if k & c == c && parity_sign(k, pm) < 0.0 {
                    *a = -*a;
                }
            }
            return Ok(());
        }
        let pos = flip.trailing_zeros();
        for m in 0..self.amps.len() / 2 {
            let k = insert_zero(m, pos);
            if k & c != c {
                continue;
            }
            let j = k ^ flip;
            let a = self.amps[k];
            let b = self.amps[j];
            // (Σψ)[k] = ph(j) ψ[j]
            self.amps[k] = yph * parity_sign(j, pm) * b;
            self.amps[j] = yph * parity_sign(k, pm) * a;
        }
        Ok(())
    }

    /// `|ψ⟩ → exp(iθΣ)|ψ⟩ = cos θ |ψ⟩ + i sin θ Σ|ψ⟩`.
    pub fn apply_pauli_rotation(&mut self, p: &PauliString, angle: f64) -> Result<()> {
        self.apply_pauli_rotation_controlled(p, 0, angle)
    }

    /// `exp(iθ P Σ)` where `P` projects onto `|1⟩` for every qubit in `controls`.
    pub fn apply_pauli_rotation_controlled(&mut self, p: &PauliString, controls: u64, angle: f64) -> Result<()> {
        self.check_pauli(p, controls)?;
        if angle == 0.0 {
            return Ok(());
        }
        let (s, co) = angle.sin_cos();
        let flip = p.flip_mask() as usize;
        let pm = p.phase_mask();
        let c = controls as usize;
        if flip == 0 {
            let plus = Complex64::new(co, s);
            let minus = Complex64::new(co, -s);
            for (k, a) in self.amps.iter_mut().enumerate() {
                if k & c == c {
                    *a *= if parity_sign(k, pm) > 0.0 { plus } else { minus };
                }
            }
            return Ok(());
        }
        let is = Complex64::new(0.0, s) * p.y_phase();
        let pos = flip.trailing_zeros();
        for m in 0..self.amps.len() / 2 {
            let k = insert_zero(m, pos);
            if k & c != c {
                continue;
            }
            let j = k ^ flip;
            let a = self.amps[k];
            let b = self.amps[j];
            self.amps[k] = a * co + is * parity_sign(j, pm) * b;
            self.amps[j] = b * co + is * parity_sign(k, pm) * a;
        }
        Ok(())
    }

    /// Hadamard on one qubit.
    pub fn apply_hadamard(&mut self, qubit: usize) -> Result<()> {
        if qubit == 0 || qubit > self.num_qubits {
            return Err(QnnError::QubitOutOfRange {
                qubit,
                num_qubits: self.num_qubits,
            });
        }
        let pos = (qubit - 1) as u32;
        let bit = 1usize << pos;
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for m in 0..self.amps.len() / 2 {
            let k = insert_zero(m, pos);
            let a = self.amps[k];
            let b = self.amps[k | bit];
            self.amps[k] = (a + b) * r;
            self.amps[k | bit] = (a - b) * r;
        }
        Ok(())
    }

    /// Multiplies every amplitude whose index has all bits of `mask` set.
    pub fn scale_where(&mut self, mask: u64, factor: Complex64) -> Result<()> {
        self.check_mask(mask)?;
        let c = mask as usize;
        for (k, a) in self.amps.iter_mut().enumerate() {
            if k & c == c {
                *a *= factor;
            }
        }
        Ok(())
    }

    /// `⟨self| P_C Σ |ket⟩` without materializing `Σ|ket⟩`.
    pub fn matrix_element(&self, p: &PauliString, controls: u64, ket: &Self) -> Result<Complex64> {
        if self.num_qubits != ket.num_qubits {
            return Err(QnnError::DimensionMismatch {
                expected: self.num_qubits,
                found: ket.num_qubits,
            });
        }
        self.check_pauli(p, controls)?;
        let flip = p.flip_mask() as usize;
        let pm = p.phase_mask();
        let c = controls as usize;
        let mut acc = ZERO;
        for (k, bra) in self.amps.iter().enumerate() {
            if k & c != c {
                continue;
            }
            let j = k ^ flip;
            acc += bra.conj() * ket.amps[j] * parity_sign(j, pm);
        }
        Ok(acc * p.y_phase())
    }

    /// `⟨ψ|Σ|ψ⟩`.
    pub fn expectation_pauli(&self, p: &PauliString) -> Result<f64> {
        Ok(self.matrix_element(p, 0, self)?.re)
    }

    /// `⟨self|other⟩`.
    pub fn inner_product(&self, other: &Self) -> Result<Complex64> {
        if self.num_qubits != other.num_qubits {
            return Err(QnnError::DimensionMismatch {
                expected: self.num_qubits,
                found: other.num_qubits,
            });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// Probability that `qubit` reads `|0⟩`.
    pub fn prob_zero(&self, qubit: usize) -> Result<f64> {
        if qubit == 0 || qubit > self.num_qubits {
            return Err(QnnError::QubitOutOfRange {
                qubit,
                num_qubits: self.num_qubits,
            });
        }
        let bit = 1usize << (qubit - 1);
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(k, _)| k & bit == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }
}

/// Index of the basis state for a ±1 string (`−1` sets the bit).
pub fn bits_to_index(bits: &[i8]) -> Result<usize> {
    if bits.len() > MAX_QUBITS {
        return Err(invalid("bit string too long"));
    }
    let mut index = 0usize;
    for (i, &b) in bits.iter().enumerate() {
        match b {
            1 => {}
            -1 => index |= 1 << i,
            other => return Err(invalid(format!("bit value {other} is not ±1"))),
        }
    }
    Ok(index)
}

/// Inverse of [`bits_to_index`].
pub fn index_to_bits(index: usize, n: usize) -> Vec<i8> {
    (0..n).map(|i| if index >> i & 1 == 1 { -1 } else { 1 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::PauliAxis;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: &QuantumState, b: &[Complex64], tol: f64) -> bool {
        a.amplitudes().iter().zip(b).all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn basis_encoding() {
        let s = QuantumState::basis_state(&[1], false).unwrap();
        assert_eq!(s.amplitude(0), ONE);
        let s = QuantumState::basis_state(&[1, -1], true).unwrap();
        assert_eq!(s.num_qubits(), 3);
        assert_eq!(s.amplitude(2), ONE);
        let s = QuantumState::basis_state(&[-1, -1], false).unwrap();
        assert_eq!(s.amplitude(3), ONE);
        assert!(QuantumState::basis_state(&[], true).is_err());
        assert!(QuantumState::basis_state(&[1, 0], true).is_err());
    }

    #[test]
    fn single_qubit_paulis() {
        let x = PauliString::single(1, PauliAxis::X).unwrap();
        let y = PauliString::single(1, PauliAxis::Y).unwrap();
        let z = PauliString::single(1, PauliAxis::Z).unwrap();

        let mut s = QuantumState::zero(1).unwrap();
        s.apply_pauli(&x).unwrap();
        assert!(close(&s, &[ZERO, ONE], 0.0));

        let mut s = QuantumState::basis_index(1, 1).unwrap();
        s.apply_pauli(&z).unwrap();
        assert!(close(&s, &[ZERO, -ONE], 0.0));

        // Y = [[0, -i], [i, 0]]
        let mut s = QuantumState::zero(1).unwrap();
        s.apply_pauli(&y).unwrap();
        assert!(close(&s, &[ZERO, c(0.0, 1.0)], 0.0));
        let mut s = QuantumState::basis_index(1, 1).unwrap();
        s.apply_pauli(&y).unwrap();
        assert!(close(&s, &[c(0.0, -1.0), ZERO], 0.0));
    }

    #[test]
    fn rotations() {
        let x = PauliString::single(1, PauliAxis::X).unwrap();
        let y = PauliString::single(1, PauliAxis::Y).unwrap();

        let mut s = QuantumState::zero(1).unwrap();
        s.apply_pauli_rotation(&x, 0.0).unwrap();
        assert!(close(&s, &[ONE, ZERO], 0.0));

        let mut s = QuantumState::zero(1).unwrap();
        s.apply_pauli_rotation(&x, FRAC_PI_2).unwrap();
        assert!(close(&s, &[ZERO, c(0.0, 1.0)], 1e-15));

        let mut s = QuantumState::zero(1).unwrap();
        s.apply_pauli_rotation(&x, FRAC_PI_4).unwrap();
        assert!(close(&s, &[c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)], 1e-15));
        assert!((s.expectation_pauli(&y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_rotation_matches_closed_form() {
        // exp(iθ Z1 Z2) on |01⟩ (index 1): Z1Z2 eigenvalue −1.
        let zz = PauliString::parse("Z1 Z2").unwrap();
        let mut s = QuantumState::basis_index(1, 2).unwrap();
        s.apply_pauli_rotation(&zz, 0.3).unwrap();
        assert!((s.amplitude(1) - Complex64::from_polar(1.0, -0.3)).norm() < 1e-15);
    }

    #[test]
    fn controlled_rotation_only_fires_on_controls() {
        let x2 = PauliString::single(2, PauliAxis::X).unwrap();
        for (index, fires) in [(0usize, false), (1, true)] {
            let mut s = QuantumState::basis_index(index, 2).unwrap();
            s.apply_pauli_rotation_controlled(&x2, 0b01, -FRAC_PI_2).unwrap();
            if fires {
                // -i X on the target
                assert!((s.amplitude(index | 2) - c(0.0, -1.0)).norm() < 1e-15);
            } else {
                assert_eq!(s.amplitude(index), ONE);
            }
        }
        let mut s = QuantumState::zero(2).unwrap();
        assert!(s.apply_pauli_rotation_controlled(&x2, 0b10, 1.0).is_err());
    }

    #[test]
    fn expectations() {
        let y3 = PauliString::single(3, PauliAxis::Y).unwrap();
        for idx in 0..8 {
            let s = QuantumState::basis_index(idx, 3).unwrap();
            assert_eq!(s.expectation_pauli(&y3).unwrap(), 0.0);
        }
        let z1 = PauliString::single(1, PauliAxis::Z).unwrap();
        assert_eq!(QuantumState::zero(1).unwrap().expectation_pauli(&z1).unwrap(), 1.0);
        let s = QuantumState::from_amplitudes(vec![c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)]).unwrap();
        let y1 = PauliString::single(1, PauliAxis::Y).unwrap();
        assert!((s.expectation_pauli(&y1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inner_products() {
        let a = QuantumState::zero(1).unwrap();
        assert_eq!(a.inner_product(&a).unwrap(), ONE);
        let b = QuantumState::basis_index(1, 1).unwrap();
        assert_eq!(a.inner_product(&b).unwrap(), ZERO);
        let p = QuantumState::from_amplitudes(vec![c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)]).unwrap();
        assert!((a.inner_product(&p).unwrap() - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!(a.inner_product(&QuantumState::zero(2).unwrap()).is_err());
    }

    #[test]
    fn out_of_range() {
        let mut s = QuantumState::zero(2).unwrap();
        let p = PauliString::single(3, PauliAxis::X).unwrap();
        assert!(matches!(
            s.apply_pauli(&p),
            Err(QnnError::QubitOutOfRange {
                qubit: 3,
                num_qubits: 2
            })
        ));
        assert!(s.apply_pauli_rotation(&p, 0.1).is_err());
        assert!(s.expectation_pauli(&p).is_err());
    }

    #[test]
    fn hadamard_and_append() {
        let mut s = QuantumState::zero(1).unwrap();
        s.apply_hadamard(1).unwrap();
        assert!((s.amplitude(1).re - FRAC_1_SQRT_2).abs() < 1e-15);
        let t = s.with_appended_qubit(ZERO, ONE).unwrap();
        assert_eq!(t.num_qubits(), 2);
        assert!((t.prob_zero(2).unwrap()).abs() < 1e-15);
        assert!((t.prob_zero(1).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn index_bits_roundtrip() {
        for idx in 0..32 {
            assert_eq!(bits_to_index(&index_to_bits(idx, 5)).unwrap(), idx);
        }
    }
}
