//! Circuit library: angle-encoding blocks and the four parametrized circuit
//! families used inside the hybrid networks.
//!
//! Layouts are fixed for reproducibility:
//! - Circuit 10: an initial RY on every qubit, then per layer a CZ ring
//!   (qubit i with qubit (i+1) mod n; a single CZ for n = 2) followed by an
//!   RY on every qubit. Parameter count n(L+1).
//! - Circuit 19: per layer an RX on every qubit, an RZ on every qubit, then
//!   a CRX ring (control i, target (i+1) mod n). Parameter count 3nL.
//! - MPS: ladder over qubits; block k applies RY on qubits k and k+1 then
//!   CZ(k, k+1); the last qubit is measured. Parameter count 2(n-1).
//! - TTN: binary tree; each level pairs the surviving qubits, applies RY on
//!   both then CZ and keeps the lower index; qubit 0 is measured.
//!   Parameter count 2(n-1).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevector::{Binding, GateKind, GateOp};
use crate::template::CircuitTemplate;

/// Rotation axis of the angle-encoding block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingAxis {
    X,
    Y,
    Z,
}

impl EncodingAxis {
    fn gate_kind(self) -> GateKind {
        match self {
            EncodingAxis::X => GateKind::Rx,
            EncodingAxis::Y => GateKind::Ry,
            EncodingAxis::Z => GateKind::Rz,
        }
    }
}

/// Angle encoding: one rotation per qubit, angle = scale * feature.
///
/// With features in [0, 1] and the default scale of π the rotation angle
/// stays in [0, π], where the map x ↦ ⟨σ_z⟩ is bijective for X/Y axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingSpec {
    pub axis: EncodingAxis,
    pub scale: f64,
}

impl Default for EncodingSpec {
    fn default() -> Self {
        EncodingSpec {
            axis: EncodingAxis::Y,
            scale: std::f64::consts::PI,
        }
    }
}

impl EncodingSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "encoding scale {} must be positive",
                self.scale
            )));
        }
        Ok(())
    }
}

/// The four circuit families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PqcFamily {
    Circuit10,
    Circuit19,
    Mps,
    Ttn,
}

impl PqcFamily {
    /// MPS and TTN collapse to a single measured qubit; the layered families
    /// measure every qubit.
    pub fn is_hierarchical(self) -> bool {
        matches!(self, PqcFamily::Mps | PqcFamily::Ttn)
    }

    pub fn label(self) -> &'static str {
        match self {
            PqcFamily::Circuit10 => "circuit10",
            PqcFamily::Circuit19 => "circuit19",
            PqcFamily::Mps => "mps",
            PqcFamily::Ttn => "ttn",
        }
    }
}

impl std::str::FromStr for PqcFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "circuit10" | "circuit_10" | "c10" => Ok(PqcFamily::Circuit10),
            "circuit19" | "circuit_19" | "c19" => Ok(PqcFamily::Circuit19),
            "mps" => Ok(PqcFamily::Mps),
            "ttn" => Ok(PqcFamily::Ttn),
            other => Err(Error::InvalidConfig(format!(
                "unknown circuit family '{}'",
                other
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PqcSpec {
    pub family: PqcFamily,
    pub n_qubits: usize,
    /// Repetitions for the layered families; ignored by MPS and TTN.
    pub n_layers: usize,
}

impl PqcSpec {
    pub fn layered(family: PqcFamily, n_qubits: usize, n_layers: usize) -> Self {
        PqcSpec {
            family,
            n_qubits,
            n_layers,
        }
    }

    pub fn hierarchical(family: PqcFamily, n_qubits: usize) -> Self {
        PqcSpec {
            family,
            n_qubits,
            n_layers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits < 2 {
            return Err(Error::InvalidConfig(format!(
                "{} needs at least 2 qubits, got {}",
                self.family.label(),
                self.n_qubits
            )));
        }
        if self.family == PqcFamily::Ttn && !self.n_qubits.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "ttn needs a power-of-two qubit count, got {}",
                self.n_qubits
            )));
        }
        if !self.family.is_hierarchical() && self.n_layers == 0 {
            return Err(Error::InvalidConfig(
                "layered circuits need n_layers >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Trainable parameter count as a pure function of the spec.
    pub fn param_count(&self) -> usize {
        let n = self.n_qubits;
        match self.family {
            PqcFamily::Circuit10 => n * (self.n_layers + 1),
            PqcFamily::Circuit19 => 3 * n * self.n_layers,
            PqcFamily::Mps | PqcFamily::Ttn => 2 * (n - 1),
        }
    }

    pub fn measured_qubits(&self) -> Vec<usize> {
        match self.family {
            PqcFamily::Circuit10 | PqcFamily::Circuit19 => (0..self.n_qubits).collect(),
            PqcFamily::Mps => vec![self.n_qubits - 1],
            PqcFamily::Ttn => vec![0],
        }
    }

    /// Gate list of the bare circuit, trainable indices starting at 0.
    pub fn ops(&self) -> Vec<GateOp> {
        fn next(p: &mut usize) -> Binding {
            let b = Binding::Trainable(*p);
            *p += 1;
            b
        }
        let n = self.n_qubits;
        let mut ops = Vec::new();
        let mut p = 0usize;
        match self.family {
            PqcFamily::Circuit10 => {
                for q in 0..n {
                    ops.push(GateOp::ry(q, next(&mut p)));
                }
                for _ in 0..self.n_layers {
                    if n == 2 {
                        ops.push(GateOp::cz(0, 1));
                    } else {
                        for i in 0..n {
                            ops.push(GateOp::cz(i, (i + 1) % n));
                        }
                    }
                    for q in 0..n {
                        ops.push(GateOp::ry(q, next(&mut p)));
                    }
                }
            }
            PqcFamily::Circuit19 => {
                for _ in 0..self.n_layers {
                    for q in 0..n {
                        ops.push(GateOp::rx(q, next(&mut p)));
                    }
                    for q in 0..n {
                        ops.push(GateOp::rz(q, next(&mut p)));
                    }
                    for i in 0..n {
                        ops.push(GateOp::crx(i, (i + 1) % n, next(&mut p)));
                    }
                }
            }
            PqcFamily::Mps => {
                for k in 0..n - 1 {
                    ops.push(GateOp::ry(k, next(&mut p)));
                    ops.push(GateOp::ry(k + 1, next(&mut p)));
                    ops.push(GateOp::cz(k, k + 1));
                }
            }
            PqcFamily::Ttn => {
                let mut survivors: Vec<usize> = (0..n).collect();
                while survivors.len() > 1 {
                    let mut kept = Vec::with_capacity(survivors.len() / 2);
                    for pair in survivors.chunks(2) {
                        let (a, b) = (pair[0], pair[1]);
                        ops.push(GateOp::ry(a, next(&mut p)));
                        ops.push(GateOp::ry(b, next(&mut p)));
                        ops.push(GateOp::cz(a, b));
                        kept.push(a);
                    }
                    survivors = kept;
                }
            }
        }
        ops
    }
}

/// Encode then transform: the quantum layer used inside the hybrid networks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QnnSpec {
    pub encoding: EncodingSpec,
    pub pqc: PqcSpec,
}

impl QnnSpec {
    pub fn validate(&self) -> Result<()> {
        self.encoding.validate()?;
        self.pqc.validate()
    }
}

/// One encoding rotation per qubit, input-bound in qubit order.
pub fn encoding_ops(spec: &EncodingSpec, n_qubits: usize) -> Vec<GateOp> {
    let kind = spec.axis.gate_kind();
    (0..n_qubits)
        .map(|q| GateOp {
            kind,
            target: q,
            control: None,
            binding: Some(Binding::Input {
                index: q,
                scale: spec.scale,
            }),
        })
        .collect()
}

/// Builds the full template: encoding rotations followed by the family's
/// parameterized ops, measuring per the family convention. The template has
/// one input per qubit.
pub fn build_qnn(spec: &QnnSpec) -> Result<CircuitTemplate> {
    spec.validate()?;
    let n = spec.pqc.n_qubits;
    let mut ops = encoding_ops(&spec.encoding, n);
    ops.extend(spec.pqc.ops());
    CircuitTemplate::new(n, ops, spec.pqc.param_count(), n, spec.pqc.measured_qubits())
}

/// Forward pass of the quantum layer: inputs in [0, 1] (a sigmoid is expected
/// upstream), one ⟨σ_z⟩ per measured qubit.
pub fn qnn_forward(template: &CircuitTemplate, params: &[f64], inputs: &[f64]) -> Result<Vec<f64>> {
    for (i, &x) in inputs.iter().enumerate() {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InputOutOfRange { index: i, value: x });
        }
    }
    let state = template.run(params, inputs)?;
    template
        .measured_qubits()
        .iter()
        .map(|&q| state.expectation_z(q))
        .collect()
}
