use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use super::Circuit;
use crate::error::{invalid, QnnError, Result};
use crate::sim::{PauliAxis, PauliString};

/// Layers whose gates all act on the readout (as `X`) plus data qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LayerKind {
    /// `Z_j X_r` for each data qubit.
    Zx,
    /// `X_j X_r` for each data qubit.
    Xx,
    /// `Z_i Z_j X_r` for each unordered data pair, lexicographic.
    Zzx,
}

impl FromStr for LayerKind {
    type Err = QnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ZX" => Ok(LayerKind::Zx),
            "XX" => Ok(LayerKind::Xx),
            "ZZX" => Ok(LayerKind::Zzx),
            _ => Err(QnnError::UnknownLayer(s.to_string())),
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LayerKind::Zx => "ZX",
            LayerKind::Xx => "XX",
            LayerKind::Zzx => "ZZX",
        })
    }
}

/// Readout circuit on `n + 1` qubits with one fresh parameter per gate.
pub fn build_layered_readout_circuit(n: usize, layers: &[LayerKind]) -> Result<Circuit> {
    if n == 0 {
        return Err(invalid("need at least one data qubit"));
    }
    let r = n + 1;
    let mut c = Circuit::new(r, 0)?;
    for layer in layers {
        match layer {
            LayerKind::Zx | LayerKind::Xx => {
                let axis = if *layer == LayerKind::Zx {
                    PauliAxis::Z
                } else {
                    PauliAxis::X
                };
                for j in 1..=n {
                    c.push_new_param(PauliString::new(vec![(j, axis), (r, PauliAxis::X)])?, 1.0)?;
                }
            }
            LayerKind::Zzx => {
                for i in 1..=n {
                    for j in i + 1..=n {
                        let p = PauliString::new(vec![(i, PauliAxis::Z), (j, PauliAxis::Z), (r, PauliAxis::X)])?;
                        c.push_new_param(p, 1.0)?;
                    }
                }
            }
        }
    }
    Ok(c)
}

/// The one- and two-qubit generators available to random circuits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateKind {
    X,
    Y,
    Z,
    Xy,
    Yz,
    Zx,
    Xx,
    Yy,
    Zz,
}

impl GateKind {
    pub const ALL: [GateKind; 9] = [
        GateKind::X,
        GateKind::Y,
        GateKind::Z,
        GateKind::Xy,
        GateKind::Yz,
        GateKind::Zx,
        GateKind::Xx,
        GateKind::Yy,
        GateKind::Zz,
    ];

    pub fn axes(self) -> &'static [PauliAxis] {
        use PauliAxis::*;
        match self {
            GateKind::X => &[X],
            GateKind::Y => &[Y],
            GateKind::Z => &[Z],
            GateKind::Xy => &[X, Y],
            GateKind::Yz => &[Y, Z],
            GateKind::Zx => &[Z, X],
            GateKind::Xx => &[X, X],
            GateKind::Yy => &[Y, Y],
            GateKind::Zz => &[Z, Z],
        }
    }
}

impl FromStr for GateKind {
    type Err = QnnError;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s.trim().to_ascii_uppercase().as_str() {
            "X" => GateKind::X,
            "Y" => GateKind::Y,
            "Z" => GateKind::Z,
            "XY" => GateKind::Xy,
            "YZ" => GateKind::Yz,
            "ZX" => GateKind::Zx,
            "XX" => GateKind::Xx,
            "YY" => GateKind::Yy,
            "ZZ" => GateKind::Zz,
            _ => return Err(invalid(format!("unknown gate kind `{s}`"))),
        };
        Ok(kind)
    }
}

/// Where random gates may land.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Placement {
    /// Uniform over all ordered tuples of distinct qubits, readout included.
    #[default]
    Anywhere,
    /// Two-qubit gates pair a data qubit (first) with the readout (second);
    /// one-qubit gates act on the readout.
    ReadoutPartner,
}

/// Random circuit of `length` gates on `n + 1` qubits, one parameter per gate.
pub fn build_random_circuit<R: Rng + ?Sized>(
    n: usize,
    length: usize,
    pool: &[GateKind],
    placement: Placement,
    rng: &mut R,
) -> Result<Circuit> {
    if length == 0 {
        return Err(invalid("random circuit length must be at least 1"));
    }
    if pool.is_empty() {
        return Err(invalid("empty gate pool"));
    }
    if n == 0 {
        return Err(invalid("need at least one data qubit"));
    }
    let width = n + 1;
    let mut c = Circuit::new(width, 0)?;
    let qubits: Vec<usize> = (1..=width).collect();
    for _ in 0..length {
        let kind = *pool.choose(rng).expect("non-empty pool");
        let axes = kind.axes();
        let targets: Vec<usize> = match (placement, axes.len()) {
            (Placement::Anywhere, k) => qubits.choose_multiple(rng, k).copied().collect(),
            (Placement::ReadoutPartner, 1) => vec![width],
            (Placement::ReadoutPartner, _) => vec![rng.gen_range(1..=n), width],
        };
        let terms = targets.into_iter().zip(axes.iter().copied()).collect();
        c.push_new_param(PauliString::new(terms)?, 1.0)?;
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layered_param_counts() {
        use LayerKind::*;
        let c = build_layered_readout_circuit(16, &[Zx, Zx, Zx, Xx, Xx, Xx]).unwrap();
        assert_eq!(c.num_params(), 96);
        assert_eq!(c.num_qubits(), 17);
        let c = build_layered_readout_circuit(16, &[Zx, Zzx]).unwrap();
        assert_eq!(c.num_params(), 136);
        assert!(c.is_data_diagonal());
        let c = build_layered_readout_circuit(1, &[Zx]).unwrap();
        assert_eq!(c.gates().len(), 1);
        assert_eq!(c.num_params(), 1);
        assert_eq!(c.gates()[0].pauli().to_string(), "Z1 X2");
    }

    #[test]
    fn zzx_pairs_are_lexicographic() {
        let c = build_layered_readout_circuit(3, &[LayerKind::Zzx]).unwrap();
        let names: Vec<String> = c.gates().iter().map(|g| g.pauli().to_string()).collect();
        assert_eq!(names, ["Z1 Z2 X4", "Z1 Z3 X4", "Z2 Z3 X4"]);
    }

    #[test]
    fn unknown_layer() {
        assert!(matches!("YX".parse::<LayerKind>(), Err(QnnError::UnknownLayer(_))));
        assert_eq!("zzx".parse::<LayerKind>().unwrap(), LayerKind::Zzx);
    }

    #[test]
    fn random_circuits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = build_random_circuit(16, 500, &GateKind::ALL, Placement::Anywhere, &mut rng).unwrap();
        assert_eq!(c.num_params(), 500);
        assert_eq!(c.gates().len(), 500);

        let c = build_random_circuit(4, 1, &[GateKind::X], Placement::Anywhere, &mut rng).unwrap();
        assert_eq!(c.gates()[0].pauli().terms().len(), 1);

        let a = build_random_circuit(
            5,
            40,
            &GateKind::ALL,
            Placement::Anywhere,
            &mut ChaCha8Rng::seed_from_u64(9),
        )
        .unwrap();
        let b = build_random_circuit(
            5,
            40,
            &GateKind::ALL,
            Placement::Anywhere,
            &mut ChaCha8Rng::seed_from_u64(9),
        )
        .unwrap();
        assert_eq!(a, b);

        let c = build_random_circuit(
            6,
            50,
            &[GateKind::Zx, GateKind::Xx],
            Placement::ReadoutPartner,
            &mut rng,
        )
        .unwrap();
        assert!(c.gates().iter().all(|g| g.pauli().axis_on(7) == Some(PauliAxis::X)));
        assert!(build_random_circuit(0, 5, &GateKind::ALL, Placement::Anywhere, &mut rng).is_err());
    }
}
