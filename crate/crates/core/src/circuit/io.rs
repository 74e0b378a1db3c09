use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AngleBinding, Circuit, Gate};
use crate::error::Result;
use crate::sim::{PauliAxis, PauliString};

#[derive(Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum RawBinding {
    Fixed { fixed: f64 },
    Bound { param: usize, scale: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGate {
    pauli: PauliString,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    controls: Vec<usize>,
    binding: RawBinding,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCircuit {
    num_qubits: usize,
    readout_qubit: usize,
    readout_axis: PauliAxis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    num_params: Option<usize>,
    gates: Vec<RawGate>,
}

impl Circuit {
    pub fn to_json(&self) -> Result<String> {
        let raw = RawCircuit {
            num_qubits: self.num_qubits,
            readout_qubit: self.readout_qubit,
            readout_axis: self.readout_axis,
            num_params: Some(self.num_params),
            gates: self
                .gates
                .iter()
                .map(|g| RawGate {
                    pauli: g.pauli.clone(),
                    controls: g.controls.clone(),
                    binding: match g.binding {
                        AngleBinding::Fixed(fixed) => RawBinding::Fixed { fixed },
                        AngleBinding::Bound { param, scale } => RawBinding::Bound { param, scale },
                    },
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&raw)?)
    }

    /// Parses the JSON circuit format. `num_params` may be omitted, in which
    /// case it is one past the largest bound index.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawCircuit = serde_json::from_str(text)?;
        let inferred = raw
            .gates
            .iter()
            .filter_map(|g| match g.binding {
                RawBinding::Bound { param, .. } => Some(param + 1),
                RawBinding::Fixed { .. } => None,
            })
            .max()
            .unwrap_or(0);
        let num_params = raw.num_params.unwrap_or(inferred);
        let mut c = Circuit::with_readout(raw.num_qubits, raw.readout_qubit, raw.readout_axis, num_params)?;
        for g in raw.gates {
            let binding = match g.binding {
                RawBinding::Fixed { fixed } => AngleBinding::Fixed(fixed),
                RawBinding::Bound { param, scale } => AngleBinding::Bound { param, scale },
            };
            c.push(Gate::new(g.pauli, binding).with_controls(g.controls)?)?;
        }
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
