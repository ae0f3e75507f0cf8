//! Adjoint-mode differentiation of circuit templates.
//!
//! Computes exact partial derivatives of every measured-qubit ⟨σ_z⟩ with
//! respect to every trainable parameter and every input feature in a single
//! reverse sweep per observable. For a Hermitian observable O and circuit
//! U_N...U_1|0⟩ the derivative with respect to the angle of gate k is
//! 2·Re⟨λ_k| dU_k |ψ_{k-1}⟩ with λ_k = U_{k+1}†...U_N† O |ψ_N⟩, so the cost
//! is O(#gates) state updates per observable and no parameter-shift rules
//! are needed (CRX would require a four-term shift).

use crate::error::Result;
use crate::statevector::{inner_product, Binding};
use crate::template::CircuitTemplate;

/// Expectations and their exact Jacobians, one row per measured qubit.
#[derive(Debug, Clone)]
pub struct QnnGradients {
    /// ⟨σ_z⟩ per measured qubit.
    pub expectations: Vec<f64>,
    /// d⟨σ_z⟩/dθ_p, indexed `[measured][param]`.
    pub d_params: Vec<Vec<f64>>,
    /// d⟨σ_z⟩/dx_i, indexed `[measured][input]`.
    pub d_inputs: Vec<Vec<f64>>,
}

/// Runs the template and differentiates each measured expectation with
/// respect to all trainable parameters and inputs.
pub fn adjoint_gradients(
    template: &CircuitTemplate,
    params: &[f64],
    inputs: &[f64],
) -> Result<QnnGradients> {
    let angles = template.resolve_angles(params, inputs)?;
    let final_state = template.run(params, inputs)?;

    let measured = template.measured_qubits();
    let mut expectations = Vec::with_capacity(measured.len());
    let mut d_params = Vec::with_capacity(measured.len());
    let mut d_inputs = Vec::with_capacity(measured.len());

    for &q in measured {
        expectations.push(final_state.expectation_z(q)?);

        let mut grad_p = vec![0.0; template.n_params()];
        let mut grad_x = vec![0.0; template.n_inputs()];

        // lambda starts as O|psi_N>, phi as |psi_N>; both are rewound in lockstep.
        let mut lambda = final_state.clone();
        lambda.apply_z(q);
        let mut phi = final_state.clone();

        for (op, angle) in template.ops().iter().zip(&angles).rev() {
            phi.apply_inverse_unchecked(op, *angle);
            match op.binding {
                Some(Binding::Trainable(i)) => {
                    let g = gate_angle_grad(&lambda, &phi, op, angle.unwrap());
                    grad_p[i] += g;
                }
                Some(Binding::Input { index, scale }) => {
                    let g = gate_angle_grad(&lambda, &phi, op, angle.unwrap());
                    grad_x[index] += scale * g;
                }
                // constants and CZ contribute nothing
                _ => {}
            }
            lambda.apply_inverse_unchecked(op, *angle);
        }

        d_params.push(grad_p);
        d_inputs.push(grad_x);
    }

    Ok(QnnGradients {
        expectations,
        d_params,
        d_inputs,
    })
}

/// 2·Re⟨λ| dU/dθ |ψ⟩ for one gate.
fn gate_angle_grad(
    lambda: &crate::statevector::Statevector,
    psi_before: &crate::statevector::Statevector,
    op: &crate::statevector::GateOp,
    angle: f64,
) -> f64 {
    let mut t = psi_before.clone();
    t.apply_derivative_unchecked(op, angle);
    2.0 * inner_product(lambda, &t).re
}
