use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, QnnError, Result};

/// Single-qubit Pauli axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];
}

impl fmt::Display for PauliAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            PauliAxis::X => 'X',
            PauliAxis::Y => 'Y',
            PauliAxis::Z => 'Z',
        };
        write!(f, "{c}")
    }
}

impl FromStr for PauliAxis {
    type Err = QnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "X" | "x" => Ok(PauliAxis::X),
            "Y" | "y" => Ok(PauliAxis::Y),
            "Z" | "z" => Ok(PauliAxis::Z),
            other => Err(invalid(format!("unknown Pauli axis `{other}`"))),
        }
    }
}

/// Tensor product of single-qubit Paulis on distinct qubits (1-based indices).
///
/// Terms are kept sorted by qubit. The bit masks used by the simulator
/// kernels are computed once at construction.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<(usize, PauliAxis)>", into = "Vec<(usize, PauliAxis)>")]
pub struct PauliString {
    terms: Vec<(usize, PauliAxis)>,
    flip_mask: u64,
    phase_mask: u64,
    y_count: u32,
}

impl PauliString {
    pub fn new(mut terms: Vec<(usize, PauliAxis)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(invalid("Pauli string must act on at least one qubit"));
        }
        terms.sort_by_key(|&(q, _)| q);
        let mut flip_mask = 0u64;
        let mut phase_mask = 0u64;
        let mut y_count = 0;
        for w in terms.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(invalid(format!("qubit {} repeated in Pauli string", w[0].0)));
            }
        }
        for &(q, axis) in &terms {
            if q == 0 || q > 63 {
                return Err(invalid(format!("qubit index {q} must lie in 1..=63")));
            }
            let bit = 1u64 << (q - 1);
            match axis {
                PauliAxis::X => flip_mask |= bit,
                PauliAxis::Y => {
                    flip_mask |= bit;
                    phase_mask |= bit;
                    y_count += 1;
                }
                PauliAxis::Z => phase_mask |= bit,
            }
        }
        Ok(Self {
            terms,
            flip_mask,
            phase_mask,
            y_count,
        })
    }

    pub fn single(qubit: usize, axis: PauliAxis) -> Result<Self> {
        Self::new(vec![(qubit, axis)])
    }

    /// Parses compact notation such as `"Z1 X5"` or `"Z3,Z4,X9"`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for tok in text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
        {
            let (axis, q) = tok.split_at(1);
            let axis: PauliAxis = axis.parse()?;
            let q: usize = q.parse().map_err(|_| invalid(format!("bad qubit index in `{tok}`")))?;
            terms.push((q, axis));
        }
        Self::new(terms)
    }

    pub fn terms(&self) -> &[(usize, PauliAxis)] {
        &self.terms
    }

    /// Largest qubit index touched.
    pub fn max_qubit(&self) -> usize {
        self.terms.last().map(|t| t.0).unwrap_or(0)
    }

    pub fn axis_on(&self, qubit: usize) -> Option<PauliAxis> {
        self.terms.iter().find(|t| t.0 == qubit).map(|t| t.1)
    }

    pub fn support_mask(&self) -> u64 {
        self.flip_mask | self.phase_mask
    }

    /// Bits flipped by the string (X and Y positions).
    pub fn flip_mask(&self) -> u64 {
        self.flip_mask
    }

    /// Bits contributing a sign (Y and Z positions).
    pub fn phase_mask(&self) -> u64 {
        self.phase_mask
    }

    /// Global factor `i^(#Y)`.
    pub fn y_phase(&self) -> Complex64 {
        match self.y_count % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    /// Returns a copy multiplied by `Z` on each qubit of `mask`, which must be
    /// disjoint from the current support.
    pub(crate) fn with_z_on(&self, mask: u64) -> Result<Self> {
        let mut terms = self.terms.clone();
        for q in 0..64 {
            if mask >> q & 1 == 1 {
                terms.push((q + 1, PauliAxis::Z));
            }
        }
        Self::new(terms)
    }
}

impl TryFrom<Vec<(usize, PauliAxis)>> for PauliString {
    type Error = QnnError;

    fn try_from(terms: Vec<(usize, PauliAxis)>) -> Result<Self> {
        Self::new(terms)
    }
}

impl From<PauliString> for Vec<(usize, PauliAxis)> {
    fn from(p: PauliString) -> Self {
        p.terms
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (q, a)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{a}{q}")?;
        }
        Ok(())
    }
}
