//! Label functions and the circuits that represent them exactly.
//!
//! Bits use the Boolean variables `b_i = (1 − z_i)/2`; a label is `l = 1 − 2b`.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt::Write as _;

use rand::Rng;

use crate::circuit::{Circuit, Gate};
use crate::error::{invalid, QnnError, Result};
use crate::sim::{PauliAxis, PauliString, QuantumState};

/// Tolerance below which `⟨H⟩` is treated as a tie.
pub const HAMILTONIAN_TIE_TOLERANCE: f64 = 1e-12;

/// Truth table of a Boolean function; entry `x` is `b(x)` where bit `i − 1`
/// of `x` is `b_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BooleanTruthTable {
    n: usize,
    values: Vec<u8>,
}

impl BooleanTruthTable {
    pub fn new(n: usize, values: Vec<u8>) -> Result<Self> {
        if n > 24 {
            return Err(invalid("truth tables limited to 24 variables"));
        }
        if values.len() != 1 << n {
            return Err(QnnError::DimensionMismatch {
                expected: 1 << n,
                found: values.len(),
            });
        }
        if values.iter().any(|&v| v > 1) {
            return Err(invalid("truth table entries must be 0 or 1"));
        }
        Ok(Self { n, values })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize) -> u8) -> Result<Self> {
        Self::new(n, (0..1usize << n).map(f).collect())
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        Self::new(n, (0..1usize << n).map(|_| rng.gen_range(0..=1)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn value(&self, x: usize) -> u8 {
        self.values[x]
    }

    /// Hex digits, most significant first, of the integer whose bit `x` is `b(x)`.
    pub fn to_hex(&self) -> String {
        let digits = self.values.len().div_ceil(4);
        let mut out = String::with_capacity(digits);
        for d in (0..digits).rev() {
            let mut nibble = 0u32;
            for k in 0..4 {
                let x = 4 * d + k;
                if x < self.values.len() && self.values[x] == 1 {
                    nibble |= 1 << k;
                }
            }
            write!(out, "{nibble:x}").unwrap();
        }
        out
    }

    pub fn from_hex(n: usize, hex: &str) -> Result<Self> {
        let hex = hex.trim().trim_start_matches("0x");
        let size = 1usize << n;
        if hex.len() != size.div_ceil(4) {
            return Err(invalid(format!(
                "a {n}-variable table needs {} hex digits, got {}",
                size.div_ceil(4),
                hex.len()
            )));
        }
        let mut values = vec![0u8; size];
        for (d, ch) in hex.chars().rev().enumerate() {
            let nibble = ch
                .to_digit(16)
                .ok_or_else(|| invalid(format!("bad hex digit `{ch}`")))?;
            for k in 0..4 {
                let x = 4 * d + k;
                if nibble >> k & 1 == 1 {
                    if x >= size {
                        return Err(invalid("hex value exceeds table size"));
                    }
                    values[x] = 1;
                }
            }
        }
        Self::new(n, values)
    }
}

/// GF(2) polynomial: XOR over monomials, each an AND of the listed bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReedMullerForm {
    n: usize,
    monomials: BTreeSet<Vec<usize>>,
}

impl ReedMullerForm {
    pub fn new(n: usize, monomials: impl IntoIterator<Item = Vec<usize>>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for mut m in monomials {
            m.sort_unstable();
            m.dedup();
            if m.iter().any(|&i| i == 0 || i > n) {
                return Err(invalid(format!("monomial {m:?} outside 1..={n}")));
            }
            // x ⊕ x = 0
            if !set.insert(m.clone()) {
                set.remove(&m);
            }
        }
        Ok(Self { n, monomials: set })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn monomials(&self) -> &BTreeSet<Vec<usize>> {
        &self.monomials
    }

    /// `b(x)` for the b-pattern index `x`.
    pub fn evaluate(&self, x: usize) -> u8 {
        self.monomials
            .iter()
            .filter(|m| m.iter().all(|&i| x >> (i - 1) & 1 == 1))
            .count() as u8
            & 1
    }

    pub fn to_truth_table(&self) -> Result<BooleanTruthTable> {
        BooleanTruthTable::from_fn(self.n, |x| self.evaluate(x))
    }
}

/// Binary Möbius transform of a truth table.
pub fn reed_muller_transform(t: &BooleanTruthTable) -> ReedMullerForm {
    let mut coeffs = t.values.clone();
    for i in 0..t.n {
        let bit = 1 << i;
        for x in 0..coeffs.len() {
            if x & bit != 0 {
                coeffs[x] ^= coeffs[x ^ bit];
            }
        }
    }
    let monomials = coeffs
        .iter()
        .enumerate()
        .filter(|(_, &a)| a == 1)
        .map(|(x, _)| (1..=t.n).filter(|i| x >> (i - 1) & 1 == 1).collect::<Vec<_>>())
        .collect();
    ReedMullerForm { n: t.n, monomials }
}

fn readout_x(r: usize) -> PauliString {
    PauliString::single(r, PauliAxis::X).expect("readout index is positive")
}

/// Exact representation circuit: `exp(iπ/4 X_r)` followed by one
/// `exp(−iπ/2 B_S X_r)` per monomial `S`, realized as an `X_r` rotation
/// controlled on every bit of `S`.
pub fn compile_label_circuit(rm: &ReedMullerForm) -> Result<Circuit> {
    let r = rm.n + 1;
    let mut c = Circuit::new(r, 0)?;
    c.push(Gate::fixed(readout_x(r), FRAC_PI_4))?;
    for m in &rm.monomials {
        c.push(Gate::fixed(readout_x(r), -FRAC_PI_2).with_controls(m.clone())?)?;
    }
    Ok(c)
}

/// A subset of the `n` bits (1-based).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsetSpec {
    n: usize,
    members: Vec<usize>,
}

impl SubsetSpec {
    pub fn new(n: usize, mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if members.is_empty() {
            return Err(invalid("subset must be non-empty"));
        }
        if members.iter().any(|&j| j == 0 || j > n) {
            return Err(invalid(format!("subset {members:?} outside 1..={n}")));
        }
        Ok(Self { n, members })
    }

    pub fn full(n: usize) -> Self {
        Self {
            n,
            members: (1..=n).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, j: usize) -> bool {
        self.members.binary_search(&j).is_ok()
    }

    /// Indicator vector `a_j`.
    pub fn indicators(&self) -> Vec<f64> {
        (1..=self.n).map(|j| self.contains(j) as u8 as f64).collect()
    }
}

/// Subset-parity circuit. Parameterized: `exp(iπ/4 X_r) exp(−i Σ θ_j B_j X_r)`
/// with one parameter per data bit; otherwise the angles are fixed to
/// `π/2` on members.
pub fn subset_parity_circuit(spec: &SubsetSpec, parameterized: bool) -> Result<Circuit> {
    let n = spec.n;
    let r = n + 1;
    let mut c = Circuit::new(r, if parameterized { n } else { 0 })?;
    c.push(Gate::fixed(readout_x(r), FRAC_PI_4))?;
    for j in 1..=n {
        let gate = if parameterized {
            Gate::bound(readout_x(r), j - 1, -1.0)
        } else if spec.contains(j) {
            Gate::fixed(readout_x(r), -FRAC_PI_2)
        } else {
            continue;
        };
        c.push(gate.with_controls(vec![j])?)?;
    }
    Ok(c)
}

/// Optimal parameters of the parameterized parity circuit.
pub fn parity_optimal_params(spec: &SubsetSpec) -> Vec<f64> {
    spec.indicators().iter().map(|a| a * FRAC_PI_2).collect()
}

/// Subset-majority circuit `exp(i β/2 Σ_j θ_j Z_j X_r)`; fixed form uses `θ_j = a_j`.
pub fn subset_majority_circuit(spec: &SubsetSpec, beta: f64, parameterized: bool) -> Result<Circuit> {
    let n = spec.n;
    let r = n + 1;
    let mut c = Circuit::new(r, if parameterized { n } else { 0 })?;
    for j in 1..=n {
        let p = PauliString::new(vec![(j, PauliAxis::Z), (r, PauliAxis::X)])?;
        if parameterized {
            c.push(Gate::bound(p, j - 1, beta / 2.0))?;
        } else {
            let a = spec.contains(j) as u8 as f64;
            c.push(Gate::fixed(p, beta / 2.0 * a))?;
        }
    }
    Ok(c)
}

/// `0.9π/n`, the angle that makes the majority circuit threshold exactly.
pub fn majority_beta(n: usize) -> f64 {
    0.9 * std::f64::consts::PI / n as f64
}

/// `H = Σ J_ij Z_i Z_j` over graph edges, `J_ij ∈ {±1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IsingHamiltonian {
    n: usize,
    edges: Vec<(usize, usize, i8)>,
}

impl IsingHamiltonian {
    pub fn new(n: usize, edges: Vec<(usize, usize, i8)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &(i, j, coupling) in &edges {
            if !(1 <= i && i < j && j <= n) {
                return Err(invalid(format!("edge ({i}, {j}) must satisfy 1 <= i < j <= {n}")));
            }
            if coupling != 1 && coupling != -1 {
                return Err(invalid(format!("coupling {coupling} is not ±1")));
            }
            if !seen.insert((i, j)) {
                return Err(invalid(format!("duplicate edge ({i}, {j})")));
            }
        }
        Ok(Self { n, edges })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, i8)] {
        &self.edges
    }

    /// Number of terms `M`.
    pub fn num_terms(&self) -> usize {
        self.edges.len()
    }

    /// Parses lines `i j J`; blank lines and `#` comments are skipped.
    pub fn parse_edge_list(n: usize, text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| QnnError::Parse {
                line: lineno + 1,
                msg: msg.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [i, j, coupling] = fields.as_slice() else {
                return Err(err("expected `i j J`"));
            };
            let i: usize = i.parse().map_err(|_| err("bad vertex index"))?;
            let j: usize = j.parse().map_err(|_| err("bad vertex index"))?;
            let coupling: i8 = coupling
                .trim_start_matches('+')
                .parse()
                .map_err(|_| err("bad coupling"))?;
            edges.push((i.min(j), i.max(j), coupling));
        }
        Self::new(n, edges)
    }

    pub fn to_edge_list(&self) -> String {
        self.edges.iter().map(|(i, j, c)| format!("{i} {j} {c}\n")).collect()
    }

    /// Energy of the computational basis state `x` (data bits only).
    pub fn basis_energy(&self, x: usize) -> f64 {
        self.edges
            .iter()
            .map(|&(i, j, coupling)| {
                let zi = if x >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 };
                let zj = if x >> (j - 1) & 1 == 1 { -1.0 } else { 1.0 };
                coupling as f64 * zi * zj
            })
            .sum()
    }

    /// `⟨ψ|H|ψ⟩` from the `Z_i Z_j` expectations; the state may carry extra
    /// qubits (such as the readout) above qubit `n`.
    pub fn expectation(&self, state: &QuantumState) -> Result<f64> {
        let mut total = 0.0;
        for &(i, j, coupling) in &self.edges {
            let zz = PauliString::new(vec![(i, PauliAxis::Z), (j, PauliAxis::Z)])?;
            total += coupling as f64 * state.expectation_pauli(&zz)?;
        }
        Ok(total)
    }
}

/// One `Z_i Z_j X_r` gate per edge. Parameterized with scale 1, or fixed at
/// `β J_ij` which realizes `exp(iβ H X_r)`.
pub fn hamiltonian_label_circuit(h: &IsingHamiltonian, parameterized: bool, beta: f64) -> Result<Circuit> {
    let r = h.n + 1;
    let mut c = Circuit::new(r, if parameterized { h.num_terms() } else { 0 })?;
    for (k, &(i, j, coupling)) in h.edges.iter().enumerate() {
        let p = PauliString::new(vec![(i, PauliAxis::Z), (j, PauliAxis::Z), (r, PauliAxis::X)])?;
        if parameterized {
            c.push(Gate::bound(p, k, 1.0))?;
        } else {
            c.push(Gate::fixed(p, beta * coupling as f64))?;
        }
    }
    Ok(c)
}

/// Product of `z_j` over the subset.
pub fn parity_label(spec: &SubsetSpec, z: &[i8]) -> i8 {
    spec.members.iter().map(|&j| z[j - 1]).product()
}

/// Sign of `Σ_j a_j z_j`; requires an odd subset.
pub fn majority_label(spec: &SubsetSpec, z: &[i8]) -> Result<i8> {
    if spec.members.len().is_multiple_of(2) {
        return Err(invalid("majority label needs an odd subset"));
    }
    let sum: i32 = spec.members.iter().map(|&j| z[j - 1] as i32).sum();
    Ok(if sum > 0 { 1 } else { -1 })
}

/// `1 − 2 b(z)`.
pub fn truth_table_label(t: &BooleanTruthTable, z: &[i8]) -> Result<i8> {
    let x = crate::sim::bits_to_index(z)?;
    Ok(1 - 2 * t.value(x) as i8)
}

/// Sign of `⟨ψ|H|ψ⟩`; ties within [`HAMILTONIAN_TIE_TOLERANCE`] are rejected.
pub fn hamiltonian_label(h: &IsingHamiltonian, state: &QuantumState) -> Result<i8> {
    let e = h.expectation(state)?;
    if e.abs() <= HAMILTONIAN_TIE_TOLERANCE {
        return Err(QnnError::AmbiguousLabel(e));
    }
    Ok(if e > 0.0 { 1 } else { -1 })
}

/// A classical label function on `n`-bit strings.
#[derive(Clone, Debug, PartialEq)]
pub enum LabelFunction {
    Parity(SubsetSpec),
    Majority(SubsetSpec),
    TruthTable(BooleanTruthTable),
}

impl LabelFunction {
    pub fn n(&self) -> usize {
        match self {
            LabelFunction::Parity(s) | LabelFunction::Majority(s) => s.n,
            LabelFunction::TruthTable(t) => t.n,
        }
    }

    pub fn label(&self, z: &[i8]) -> Result<i8> {
        if z.len() != self.n() {
            return Err(QnnError::DimensionMismatch {
                expected: self.n(),
                found: z.len(),
            });
        }
        match self {
            LabelFunction::Parity(s) => Ok(parity_label(s, z)),
            LabelFunction::Majority(s) => majority_label(s, z),
            LabelFunction::TruthTable(t) => truth_table_label(t, z),
        }
    }

    /// The exact representation circuit for this label (majority at `β = 0.9π/n`).
    pub fn representation_circuit(&self) -> Result<Circuit> {
        match self {
            LabelFunction::Parity(s) => subset_parity_circuit(s, false),
            LabelFunction::Majority(s) => subset_majority_circuit(s, majority_beta(s.n), false),
            LabelFunction::TruthTable(t) => compile_label_circuit(&reed_muller_transform(t)),
        }
    }
}
