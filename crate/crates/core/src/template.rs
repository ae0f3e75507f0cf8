//! Circuit templates: an ordered gate list with parameter and input bindings.
//!
//! A template is immutable after construction and captures the full
//! encode-then-transform circuit. Running it binds trainable parameters and
//! input features to angles and evolves |0...0⟩ through the gate list.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevector::{Binding, GateOp, Statevector, MAX_QUBITS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitTemplate {
    n_qubits: usize,
    ops: Vec<GateOp>,
    n_params: usize,
    n_inputs: usize,
    measured_qubits: Vec<usize>,
}

impl CircuitTemplate {
    /// Validates and freezes a gate list.
    ///
    /// Every trainable index in `[0, n_params)` must appear at least once,
    /// every input index in `[0, n_inputs)` exactly once, and
    /// `measured_qubits` must be non-empty, valid and distinct.
    pub fn new(
        n_qubits: usize,
        ops: Vec<GateOp>,
        n_params: usize,
        n_inputs: usize,
        measured_qubits: Vec<usize>,
    ) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        let mut param_seen = vec![0usize; n_params];
        let mut input_seen = vec![0usize; n_inputs];
        for op in &ops {
            op.validate(n_qubits)?;
            match op.binding {
                Some(Binding::Trainable(i)) => {
                    if i >= n_params {
                        return Err(Error::InvalidTemplate(format!(
                            "trainable index {} outside [0, {})",
                            i, n_params
                        )));
                    }
                    param_seen[i] += 1;
                }
                Some(Binding::Input { index, scale }) => {
                    if index >= n_inputs {
                        return Err(Error::InvalidTemplate(format!(
                            "input index {} outside [0, {})",
                            index, n_inputs
                        )));
                    }
                    if !(scale.is_finite() && scale != 0.0) {
                        return Err(Error::InvalidTemplate(format!(
                            "input scale {} must be finite and nonzero",
                            scale
                        )));
                    }
                    input_seen[index] += 1;
                }
                _ => {}
            }
        }
        if let Some(i) = param_seen.iter().position(|&c| c == 0) {
            return Err(Error::InvalidTemplate(format!(
                "trainable index {} never used",
                i
            )));
        }
        if let Some(i) = input_seen.iter().position(|&c| c != 1) {
            return Err(Error::InvalidTemplate(format!(
                "input index {} used {} times, expected exactly once",
                i, input_seen[i]
            )));
        }
        if measured_qubits.is_empty() {
            return Err(Error::InvalidTemplate("no measured qubits".into()));
        }
        let mut seen = vec![false; n_qubits];
        for &q in &measured_qubits {
            if q >= n_qubits {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    n_qubits,
                });
            }
            if seen[q] {
                return Err(Error::InvalidTemplate(format!(
                    "measured qubit {} listed twice",
                    q
                )));
            }
            seen[q] = true;
        }
        Ok(CircuitTemplate {
            n_qubits,
            ops,
            n_params,
            n_inputs,
            measured_qubits,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn measured_qubits(&self) -> &[usize] {
        &self.measured_qubits
    }

    /// Number of measured qubits, i.e. the output width of the circuit.
    pub fn n_outputs(&self) -> usize {
        self.measured_qubits.len()
    }

    /// Counts gates carrying a trainable binding (repeats included).
    pub fn trainable_binding_count(&self) -> usize {
        self.ops
            .iter()
            .filter(|op| matches!(op.binding, Some(Binding::Trainable(_))))
            .count()
    }

    /// Resolves the concrete angle for each op given parameter and input
    /// vectors; `None` for CZ.
    pub(crate) fn resolve_angles(
        &self,
        params: &[f64],
        inputs: &[f64],
    ) -> Result<Vec<Option<f64>>> {
        if params.len() != self.n_params {
            return Err(Error::LengthMismatch {
                what: "parameter vector",
                expected: self.n_params,
                actual: params.len(),
            });
        }
        if inputs.len() != self.n_inputs {
            return Err(Error::LengthMismatch {
                what: "input vector",
                expected: self.n_inputs,
                actual: inputs.len(),
            });
        }
        Ok(self
            .ops
            .iter()
            .map(|op| {
                op.binding.as_ref().map(|b| match *b {
                    Binding::Constant(a) => a,
                    Binding::Trainable(i) => params[i],
                    Binding::Input { index, scale } => scale * inputs[index],
                })
            })
            .collect())
    }

    /// Runs the circuit from |0...0⟩ and returns the final state.
    pub fn run(&self, params: &[f64], inputs: &[f64]) -> Result<Statevector> {
        let angles = self.resolve_angles(params, inputs)?;
        let mut state = Statevector::zero(self.n_qubits)?;
        for (op, angle) in self.ops.iter().zip(&angles) {
            state.apply_unchecked(op, *angle);
        }
        Ok(state)
    }

    /// JSON description of the gate list and bindings, for inspection and
    /// for drawing tools.
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
