//! Dense statevector simulation of small quantum registers.
//!
//! Amplitude ordering: qubit 0 is the least significant bit of the basis
//! state index, so `amps[0b10]` is the amplitude of qubit 1 in |1⟩ and
//! qubit 0 in |0⟩. Rotations follow R_A(θ) = exp(−iθA/2); CRX applies
//! R_X(θ) on the target when the control qubit is |1⟩.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on register size; dense simulation beyond this is out of scope.
pub const MAX_QUBITS: usize = 20;

/// Gate alphabet used by the circuit templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    Cz,
    Crx,
}

impl GateKind {
    pub fn name(self) -> &'static str {
        match self {
            GateKind::Rx => "RX",
            GateKind::Ry => "RY",
            GateKind::Rz => "RZ",
            GateKind::Cz => "CZ",
            GateKind::Crx => "CRX",
        }
    }

    /// CZ is the only gate without an angle.
    pub fn takes_angle(self) -> bool {
        !matches!(self, GateKind::Cz)
    }

    pub fn is_two_qubit(self) -> bool {
        matches!(self, GateKind::Cz | GateKind::Crx)
    }
}

/// How a gate angle is obtained when a template is run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    /// Fixed angle in radians.
    Constant(f64),
    /// Index into the trainable parameter vector.
    Trainable(usize),
    /// Index into the input feature vector; angle = scale * feature.
    Input { index: usize, scale: f64 },
}

/// One gate in a circuit: kind, target qubit, optional control, and the
/// angle binding (absent exactly for CZ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub target: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binding: Option<Binding>,
}

impl GateOp {
    pub fn rx(target: usize, binding: Binding) -> Self {
        GateOp {
            kind: GateKind::Rx,
            target,
            control: None,
            binding: Some(binding),
        }
    }

    pub fn ry(target: usize, binding: Binding) -> Self {
        GateOp {
            kind: GateKind::Ry,
            target,
            control: None,
            binding: Some(binding),
        }
    }

    pub fn rz(target: usize, binding: Binding) -> Self {
        GateOp {
            kind: GateKind::Rz,
            target,
            control: None,
            binding: Some(binding),
        }
    }

    pub fn cz(a: usize, b: usize) -> Self {
        GateOp {
            kind: GateKind::Cz,
            target: b,
            control: Some(a),
            binding: None,
        }
    }

    pub fn crx(control: usize, target: usize, binding: Binding) -> Self {
        GateOp {
            kind: GateKind::Crx,
            target,
            control: Some(control),
            binding: Some(binding),
        }
    }

    /// Checks qubit indices and binding shape against a register size.
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.target >= n_qubits {
            return Err(Error::QubitOutOfRange {
                index: self.target,
                n_qubits,
            });
        }
        match (self.kind.is_two_qubit(), self.control) {
            (true, Some(c)) => {
                if c >= n_qubits {
                    return Err(Error::QubitOutOfRange {
                        index: c,
                        n_qubits,
                    });
                }
                if c == self.target {
                    return Err(Error::InvalidGate {
                        kind: self.kind.name(),
                        message: format!("control and target both {}", c),
                    });
                }
            }
            (true, None) => {
                return Err(Error::InvalidGate {
                    kind: self.kind.name(),
                    message: "missing control qubit".into(),
                })
            }
            (false, Some(_)) => {
                return Err(Error::InvalidGate {
                    kind: self.kind.name(),
                    message: "unexpected control qubit".into(),
                })
            }
            (false, None) => {}
        }
        match (self.kind.takes_angle(), &self.binding) {
            (true, None) => Err(Error::InvalidGate {
                kind: self.kind.name(),
                message: "missing angle binding".into(),
            }),
            (false, Some(_)) => Err(Error::InvalidGate {
                kind: self.kind.name(),
                message: "CZ carries no binding".into(),
            }),
            _ => Ok(()),
        }
    }
}

/// 2x2 single-qubit matrix, row-major [u00, u01, u10, u11].
pub(crate) type Mat2 = [Complex64; 4];

pub(crate) fn rotation_matrix(kind: GateKind, theta: f64) -> Mat2 {
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    match kind {
        GateKind::Rx | GateKind::Crx => [
            Complex64::new(c, 0.0),
            Complex64::new(0.0, -s),
            Complex64::new(0.0, -s),
            Complex64::new(c, 0.0),
        ],
        GateKind::Ry => [
            Complex64::new(c, 0.0),
            Complex64::new(-s, 0.0),
            Complex64::new(s, 0.0),
            Complex64::new(c, 0.0),
        ],
        GateKind::Rz => [
            Complex64::from_polar(1.0, -theta / 2.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::from_polar(1.0, theta / 2.0),
        ],
        GateKind::Cz => unreachable!("CZ has no rotation matrix"),
    }
}

/// d/dθ of the rotation matrix above.
pub(crate) fn rotation_derivative(kind: GateKind, theta: f64) -> Mat2 {
    let c = 0.5 * (theta / 2.0).cos();
    let s = 0.5 * (theta / 2.0).sin();
    match kind {
        GateKind::Rx | GateKind::Crx => [
            Complex64::new(-s, 0.0),
            Complex64::new(0.0, -c),
            Complex64::new(0.0, -c),
            Complex64::new(-s, 0.0),
        ],
        GateKind::Ry => [
            Complex64::new(-s, 0.0),
            Complex64::new(-c, 0.0),
            Complex64::new(c, 0.0),
            Complex64::new(-s, 0.0),
        ],
        GateKind::Rz => [
            Complex64::new(0.0, -0.5) * Complex64::from_polar(1.0, -theta / 2.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.5) * Complex64::from_polar(1.0, theta / 2.0),
        ],
        GateKind::Cz => unreachable!("CZ has no angle"),
    }
}

/// Dense complex amplitude array for an n-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// |0...0⟩ on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Statevector { n_qubits, amps })
    }

    /// Builds a state from raw amplitudes; the length must be a power of two
    /// and the squared norm must be 1 within 1e-10.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::LengthMismatch {
                what: "amplitude array (power of two)",
                expected: len.next_power_of_two().max(2),
                actual: len,
            });
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NonFinite(format!(
                "statevector squared norm {} deviates from 1",
                norm
            )));
        }
        Ok(Statevector { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Applies a gate; `angle` must be given iff the gate kind takes one.
    /// Binding information on the op is ignored here, the caller resolves it.
    pub fn apply(&mut self, gate: &GateOp, angle: Option<f64>) -> Result<()> {
        gate.validate(self.n_qubits)?;
        match (gate.kind.takes_angle(), angle) {
            (true, None) => {
                return Err(Error::InvalidGate {
                    kind: gate.kind.name(),
                    message: "missing angle".into(),
                })
            }
            (false, Some(_)) => {
                return Err(Error::InvalidGate {
                    kind: gate.kind.name(),
                    message: "unexpected angle".into(),
                })
            }
            _ => {}
        }
        self.apply_unchecked(gate, angle);
        Ok(())
    }

    /// Gate application without re-validation; used by template execution
    /// where ops were validated at construction time.
    pub(crate) fn apply_unchecked(&mut self, gate: &GateOp, angle: Option<f64>) {
        match gate.kind {
            GateKind::Cz => self.apply_cz(gate.control.unwrap(), gate.target),
            GateKind::Crx => {
                let m = rotation_matrix(GateKind::Crx, angle.unwrap());
                self.apply_controlled_single(gate.control.unwrap(), gate.target, &m);
            }
            kind => {
                let m = rotation_matrix(kind, angle.unwrap());
                self.apply_single(gate.target, &m);
            }
        }
    }

    /// Applies the inverse of a gate (rotations invert by negating the angle,
    /// CZ is self-inverse).
    pub(crate) fn apply_inverse_unchecked(&mut self, gate: &GateOp, angle: Option<f64>) {
        self.apply_unchecked(gate, angle.map(|a| -a));
    }

    /// Applies dU/dθ of a parameterized gate. Not unitary; for CRX the
    /// control-0 subspace is annihilated.
    pub(crate) fn apply_derivative_unchecked(&mut self, gate: &GateOp, angle: f64) {
        match gate.kind {
            GateKind::Cz => unreachable!("CZ has no angle"),
            GateKind::Crx => {
                let m = rotation_derivative(GateKind::Crx, angle);
                self.apply_controlled_deriv(gate.control.unwrap(), gate.target, &m);
            }
            kind => {
                let m = rotation_derivative(kind, angle);
                self.apply_single(gate.target, &m);
            }
        }
    }

    pub(crate) fn apply_single(&mut self, target: usize, m: &Mat2) {
        let step = 1 << target;
        let len = self.amps.len();
        let mut base = 0;
        while base < len {
            for off in 0..step {
                let i0 = base + off;
                let i1 = i0 + step;
                let a = self.amps[i0];
                let b = self.amps[i1];
                self.amps[i0] = m[0] * a + m[1] * b;
                self.amps[i1] = m[2] * a + m[3] * b;
            }
            base += 2 * step;
        }
    }

    /// Applies `m` on `target` restricted to the control = |1⟩ subspace,
    /// leaving the control = |0⟩ subspace untouched.
    pub(crate) fn apply_controlled_single(&mut self, control: usize, target: usize, m: &Mat2) {
        let step = 1 << target;
        let cmask = 1usize << control;
        let len = self.amps.len();
        let mut base = 0;
        while base < len {
            for off in 0..step {
                let i0 = base + off;
                if i0 & cmask == 0 {
                    continue;
                }
                let i1 = i0 + step;
                let a = self.amps[i0];
                let b = self.amps[i1];
                self.amps[i0] = m[0] * a + m[1] * b;
                self.amps[i1] = m[2] * a + m[3] * b;
            }
            base += 2 * step;
        }
    }

    /// Derivative variant of the controlled application: the control = |0⟩
    /// subspace maps to zero rather than staying unchanged.
    pub(crate) fn apply_controlled_deriv(&mut self, control: usize, target: usize, m: &Mat2) {
        let step = 1 << target;
        let cmask = 1usize << control;
        let len = self.amps.len();
        let zero = Complex64::new(0.0, 0.0);
        let mut base = 0;
        while base < len {
            for off in 0..step {
                let i0 = base + off;
                let i1 = i0 + step;
                if i0 & cmask == 0 {
                    self.amps[i0] = zero;
                    self.amps[i1] = zero;
                } else {
                    let a = self.amps[i0];
                    let b = self.amps[i1];
                    self.amps[i0] = m[0] * a + m[1] * b;
                    self.amps[i1] = m[2] * a + m[3] * b;
                }
            }
            base += 2 * step;
        }
    }

    pub(crate) fn apply_cz(&mut self, a: usize, b: usize) {
        let mask = (1usize << a) | (1usize << b);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & mask == mask {
                *amp = -*amp;
            }
        }
    }

    /// Negates every amplitude whose `qubit` bit is set (Pauli-Z).
    pub(crate) fn apply_z(&mut self, qubit: usize) {
        let mask = 1usize << qubit;
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & mask != 0 {
                *amp = -*amp;
            }
        }
    }

    /// ⟨σ_z⟩ on one qubit: Σ_b (±1)·|amp_b|² with the sign from the bit value.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        let mask = 1usize << qubit;
        let mut acc = 0.0;
        for (i, amp) in self.amps.iter().enumerate() {
            let p = amp.norm_sqr();
            if i & mask == 0 {
                acc += p;
            } else {
                acc -= p;
            }
        }
        Ok(acc)
    }
}

/// ⟨a|b⟩ inner product (conjugate-linear in `a`).
pub(crate) fn inner_product(a: &Statevector, b: &Statevector) -> Complex64 {
    a.amps
        .iter()
        .zip(&b.amps)
        .map(|(x, y)| x.conj() * y)
        .sum()
}

/// State fidelity |⟨a|b⟩|².
pub fn fidelity(a: &Statevector, b: &Statevector) -> Result<f64> {
    if a.n_qubits != b.n_qubits {
        return Err(Error::LengthMismatch {
            what: "fidelity operands (qubits)",
            expected: a.n_qubits,
            actual: b.n_qubits,
        });
    }
    Ok(inner_product(a, b).norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn ry_pi_flips_zero() {
        let mut s = Statevector::zero(1).unwrap();
        s.apply(&GateOp::ry(0, Binding::Constant(0.0)), Some(PI))
            .unwrap();
        let amps = s.amplitudes();
        assert!(amps[0].norm() < 1e-12);
        assert!(close(amps[1].re.abs(), 1.0, 1e-12));
        assert!(close(s.expectation_z(0).unwrap(), -1.0, 1e-12));
    }

    #[test]
    fn cz_negates_only_one_one() {
        let mut s = Statevector::from_amplitudes(vec![
            Complex64::new(0.5, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(0.5, 0.0),
        ])
        .unwrap();
        s.apply(&GateOp::cz(0, 1), None).unwrap();
        let amps = s.amplitudes();
        assert!(close(amps[0].re, 0.5, 1e-15));
        assert!(close(amps[1].re, 0.5, 1e-15));
        assert!(close(amps[2].re, 0.5, 1e-15));
        assert!(close(amps[3].re, -0.5, 1e-15));
    }

    #[test]
    fn crx_identity_on_control_zero() {
        // control qubit 1 stays |0⟩, so CRX must do nothing for any angle
        for theta in [0.1, 1.3, PI, 5.0] {
            let mut s = Statevector::zero(2).unwrap();
            s.apply(&GateOp::ry(0, Binding::Constant(0.0)), Some(0.7))
                .unwrap();
            let before = s.clone();
            s.apply(&GateOp::crx(1, 0, Binding::Constant(0.0)), Some(theta))
                .unwrap();
            for (a, b) in s.amplitudes().iter().zip(before.amplitudes()) {
                assert!((a - b).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn crx_rotates_on_control_one() {
        let mut s = Statevector::zero(2).unwrap();
        // flip the control to |1⟩
        s.apply(&GateOp::ry(1, Binding::Constant(0.0)), Some(PI))
            .unwrap();
        s.apply(&GateOp::crx(1, 0, Binding::Constant(0.0)), Some(PI))
            .unwrap();
        // RX(pi)|0> = -i|1>, joint state -i|11>
        let amps = s.amplitudes();
        assert!(close(amps[3].im.abs(), 1.0, 1e-12));
        assert!(close(s.expectation_z(0).unwrap(), -1.0, 1e-12));
    }

    #[test]
    fn expectation_of_basis_states_is_exact() {
        for basis in 0..8usize {
            let mut amps = vec![Complex64::new(0.0, 0.0); 8];
            amps[basis] = Complex64::new(1.0, 0.0);
            let s = Statevector::from_amplitudes(amps).unwrap();
            for q in 0..3 {
                let want = if basis & (1 << q) == 0 { 1.0 } else { -1.0 };
                assert_eq!(s.expectation_z(q).unwrap(), want);
            }
        }
    }

    #[test]
    fn fidelity_examples() {
        let zero = Statevector::zero(1).unwrap();
        let mut one = Statevector::zero(1).unwrap();
        one.apply(&GateOp::ry(0, Binding::Constant(0.0)), Some(PI))
            .unwrap();
        let mut plus = Statevector::zero(1).unwrap();
        plus.apply(&GateOp::ry(0, Binding::Constant(0.0)), Some(PI / 2.0))
            .unwrap();
        assert!(close(fidelity(&zero, &zero).unwrap(), 1.0, 1e-15));
        assert!(close(fidelity(&zero, &one).unwrap(), 0.0, 1e-15));
        assert!(close(fidelity(&zero, &plus).unwrap(), 0.5, 1e-12));
    }

    #[test]
    fn apply_rejects_bad_angles_and_indices() {
        let mut s = Statevector::zero(2).unwrap();
        assert!(s.apply(&GateOp::ry(0, Binding::Constant(0.0)), None).is_err());
        assert!(s.apply(&GateOp::cz(0, 1), Some(0.3)).is_err());
        assert!(s.apply(&GateOp::ry(2, Binding::Constant(0.0)), Some(0.1)).is_err());
        assert!(s.apply(&GateOp::cz(1, 1), None).is_err());
    }

    #[test]
    fn qubit_cap_enforced() {
        assert!(Statevector::zero(0).is_err());
        assert!(Statevector::zero(MAX_QUBITS + 1).is_err());
    }

    #[test]
    fn from_amplitudes_checks_norm() {
        let bad = vec![Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0)];
        assert!(Statevector::from_amplitudes(bad).is_err());
    }
}
