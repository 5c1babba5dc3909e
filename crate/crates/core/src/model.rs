//! Gate targets, dressed states and error models for the driven three-level
//! (V-type) system `{|0⟩, |1⟩, |a⟩}`.
//!
//! A resonant two-tone drive couples only the bright state `|b⟩` to the
//! auxiliary level `|a⟩`; the orthogonal dark state `|d⟩` is decoupled. A
//! cyclic evolution of `|b⟩` returns it with a geometric phase `γ_g`, which
//! realizes the gate `|d⟩⟨d| + e^{iγ_g}|b⟩⟨b|`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cis, ComplexMatrix, StateVector, C64, I, ONE, ZERO};

/// Basis index of `|a⟩` in the three-level register.
pub const AUX_INDEX: usize = 2;

/// Target single-qubit holonomic rotation.
///
/// `theta` and `phi` fix the rotation axis, `gamma_g` is the geometric phase
/// (rotation angle) and `phi0` is the base drive phase of the first pulse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub theta: f64,
    pub phi: f64,
    pub gamma_g: f64,
    pub phi0: f64,
}

impl GateSpec {
    pub fn new(theta: f64, phi: f64, gamma_g: f64, phi0: f64) -> Result<Self> {
        let spec = Self {
            theta,
            phi,
            gamma_g,
            phi0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Hadamard: `θ = π/4, γ_g = π, φ = 0`.
    pub fn hadamard() -> Self {
        Self {
            theta: PI / 4.0,
            phi: 0.0,
            gamma_g: PI,
            phi0: 0.0,
        }
    }

    /// Phase gate: `θ = 0, γ_g = π/2, φ = 0`.
    pub fn s_gate() -> Self {
        Self {
            theta: 0.0,
            phi: 0.0,
            gamma_g: PI / 2.0,
            phi0: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let Self {
            theta,
            phi,
            gamma_g,
            phi0,
        } = *self;
        if ![theta, phi, gamma_g, phi0].iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite {
                context: "gate angles",
            });
        }
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::param(format!("theta = {theta} outside [0, pi]")));
        }
        if !(0.0..2.0 * PI).contains(&phi) {
            return Err(Error::param(format!("phi = {phi} outside [0, 2pi)")));
        }
        if gamma_g <= -2.0 * PI || gamma_g >= 2.0 * PI {
            return Err(Error::param(format!(
                "gamma_g = {gamma_g} outside (-2pi, 2pi)"
            )));
        }
        Ok(())
    }

    /// Rotation axis `n` for which `|b⟩` is the `−1` eigenvector of `n·σ`.
    pub fn axis(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    pub fn frame(&self) -> DressedFrame {
        DressedFrame::new(self.theta, self.phi)
    }
}

/// Bright, dark and auxiliary states in the three-level basis.
#[derive(Clone, Debug, PartialEq)]
pub struct DressedFrame {
    pub bright: StateVector,
    pub dark: StateVector,
    pub aux: StateVector,
}

impl DressedFrame {
    pub fn new(theta: f64, phi: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        let bright = StateVector::new(vec![C64::from(s), -cis(phi) * c, ZERO]);
        let dark = StateVector::new(vec![-cis(-phi) * c, C64::from(-s), ZERO]);
        Self {
            bright,
            dark,
            aux: StateVector::basis(3, AUX_INDEX),
        }
    }

    /// The qubit (first two) components of the bright and dark states.
    pub fn qubit_bright_dark(&self) -> (StateVector, StateVector) {
        let take = |v: &StateVector| StateVector::new(vec![v[0], v[1]]);
        (take(&self.bright), take(&self.dark))
    }
}

/// Systematic control errors: fractional amplitude error `epsilon` (X error)
/// and detuning `delta` in units of `Ω_m` (Z error).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub epsilon: f64,
    pub delta: f64,
}

impl ErrorModel {
    pub const NONE: Self = Self {
        epsilon: 0.0,
        delta: 0.0,
    };

    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon.is_finite() && delta.is_finite()) {
            return Err(Error::NonFinite {
                context: "error model",
            });
        }
        Ok(Self { epsilon, delta })
    }

    pub fn amplitude(epsilon: f64) -> Self {
        Self {
            epsilon,
            delta: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.epsilon == 0.0 && self.delta == 0.0
    }
}

/// Two-qubit holonomic gate `U₂(η, φ)`.
///
/// `eta` and `varphi` are the gate parameters. The exchange-coupling phases
/// `varphi3`, `varphi4` that realize them satisfy `φ₃ − φ₄ + π = −φ`: with the
/// coupling `g e^{−iφ} S⁺S⁻ + h.c.` this is the sign that puts `e^{−iφ}` in
/// the upper-right entry of each block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitGateSpec {
    pub eta: f64,
    pub varphi: f64,
    pub varphi3: f64,
    pub varphi4: f64,
}

impl TwoQubitGateSpec {
    pub fn new(eta: f64, varphi: f64) -> Result<Self> {
        let spec = Self {
            eta,
            varphi,
            varphi3: 0.0,
            varphi4: PI + varphi,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Gate `C = U₂(π/4, 0)`.
    pub fn gate_c() -> Self {
        Self::new(PI / 4.0, 0.0).expect("valid constant")
    }

    /// Builds the gate from explicit drive phases.
    pub fn from_drive_phases(eta: f64, varphi3: f64, varphi4: f64) -> Result<Self> {
        let spec = Self {
            eta,
            varphi: varphi4 - varphi3 - PI,
            varphi3,
            varphi4,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.eta, self.varphi, self.varphi3, self.varphi4]
            .iter()
            .all(|x| x.is_finite())
        {
            return Err(Error::NonFinite {
                context: "two-qubit gate angles",
            });
        }
        if !(0.0..=PI).contains(&self.eta) {
            return Err(Error::param(format!("eta = {} outside [0, pi]", self.eta)));
        }
        let mismatch = cis(self.varphi3 - self.varphi4 + PI) - cis(-self.varphi);
        if mismatch.norm() > 1e-9 {
            return Err(Error::param(
                "drive phases inconsistent with varphi (need varphi3 - varphi4 + pi = -varphi)",
            ));
        }
        Ok(())
    }

    /// Coupling amplitudes `(g₁, g₂)` for unit total strength,
    /// `tan(η/2) = g₁/g₂`.
    pub fn couplings(&self) -> (f64, f64) {
        let (s, c) = (self.eta / 2.0).sin_cos();
        (s, c)
    }
}

fn pauli_combination(axis: [f64; 3]) -> ComplexMatrix {
    let [nx, ny, nz] = axis;
    ComplexMatrix::from_rows(&[
        vec![C64::from(nz), C64::new(nx, -ny)],
        vec![C64::new(nx, ny), C64::from(-nz)],
    ])
    .expect("2x2")
}

/// Ideal gate `e^{iγ_g/2} e^{−i(γ_g/2) n·σ}` in the computational basis.
pub fn ideal_gate(spec: &GateSpec) -> ComplexMatrix {
    let half = spec.gamma_g / 2.0;
    // n·σ squares to the identity, so the exponential is cos − i sin n·σ
    let rotation = &ComplexMatrix::identity(2).scale_real(half.cos())
        - &pauli_combination(spec.axis()).scale(I * half.sin());
    rotation.scale(cis(half))
}

/// The same gate written in the dressed basis, `|d⟩⟨d| + e^{iγ_g}|b⟩⟨b|`.
pub fn dressed_gate(spec: &GateSpec) -> ComplexMatrix {
    let (b, d) = spec.frame().qubit_bright_dark();
    &d.projector() + &b.projector().scale(cis(spec.gamma_g))
}

/// Drive Hamiltonian `Ω e^{−i·phase}|b⟩⟨a| + h.c.` on `{|0⟩, |1⟩, |a⟩}`.
///
/// In terms of the two physical tones this is
/// `Ω₀e^{−iφ₀}|0⟩⟨a| + Ω₁e^{−iφ₁}|1⟩⟨a| + h.c.` with `Ω₀ = Ω sin(θ/2)`,
/// `Ω₁ = Ω cos(θ/2)`, `φ₀ = phase` and `φ₁ = phase − φ + π`.
pub fn drive_hamiltonian(spec: &GateSpec, omega: f64, phase: f64) -> ComplexMatrix {
    let (s, c) = (spec.theta / 2.0).sin_cos();
    let c0 = cis(-phase) * (omega * s);
    let c1 = cis(-(phase - spec.phi + PI)) * (omega * c);
    let mut h = ComplexMatrix::zeros(3);
    h[(0, AUX_INDEX)] = c0;
    h[(AUX_INDEX, 0)] = c0.conj();
    h[(1, AUX_INDEX)] = c1;
    h[(AUX_INDEX, 1)] = c1.conj();
    h
}

/// `|a⟩⟨a|` on the three-level register.
pub fn aux_projector() -> ComplexMatrix {
    StateVector::basis(3, AUX_INDEX).projector()
}

/// `(1 + ε)H − δ·Ω_m·P`, where `P` is the projector the detuning acts on
/// (`|a⟩⟨a|` for the bare system, the DFS identity for encoded registers).
pub fn apply_error(
    h: &ComplexMatrix,
    err: &ErrorModel,
    omega_m: f64,
    projector: &ComplexMatrix,
) -> ComplexMatrix {
    if err.is_zero() {
        return h.clone();
    }
    &h.scale_real(1.0 + err.epsilon) - &projector.scale_real(err.delta * omega_m)
}

/// `U₂(η, φ)` on the logical basis `{|00⟩, |01⟩, |10⟩, |11⟩}`.
pub fn ideal_two_qubit_gate(spec: &TwoQubitGateSpec) -> ComplexMatrix {
    let (s, c) = spec.eta.sin_cos();
    let up = cis(-spec.varphi) * s;
    let down = cis(spec.varphi) * s;
    let mut u = ComplexMatrix::zeros(4);
    u[(0, 0)] = C64::from(c);
    u[(0, 1)] = up;
    u[(1, 0)] = down;
    u[(1, 1)] = C64::from(-c);
    u[(2, 2)] = C64::from(-c);
    u[(2, 3)] = up;
    u[(3, 2)] = down;
    u[(3, 3)] = C64::from(c);
    u
}

/// Logical index of each entry of [`ideal_two_qubit_gate`] inside the
/// six-dimensional ordering `{|00⟩, |01⟩, |A₁⟩, |10⟩, |11⟩, |A₂⟩}`.
pub const PAIR_LOGICAL_INDICES: [usize; 4] = [0, 1, 3, 4];
pub const PAIR_AUX_INDICES: [usize; 2] = [2, 5];

fn pair_block_matrix(spec: &TwoQubitGateSpec, aux_entry: C64) -> ComplexMatrix {
    let mut u = ComplexMatrix::embed(6, &PAIR_LOGICAL_INDICES, &ideal_two_qubit_gate(spec));
    for &k in &PAIR_AUX_INDICES {
        u[(k, k)] = aux_entry;
    }
    u
}

/// The six-dimensional block matrix `U_T(η, φ)` taken literally, with
/// `−i` on both auxiliary diagonal entries.
pub fn literal_pair_propagator(spec: &TwoQubitGateSpec) -> ComplexMatrix {
    pair_block_matrix(spec, -I)
}

/// The six-dimensional holonomy the exchange dynamics actually produce.
///
/// Each three-level block is driven by traceless couplings, so its
/// determinant on `span{|b⟩, |a⟩}` is one; a geometric phase of `π` on the
/// bright state therefore leaves `e^{−iπ} = −1` on the auxiliary state.
pub fn holonomic_pair_propagator(spec: &TwoQubitGateSpec) -> ComplexMatrix {
    pair_block_matrix(spec, -ONE)
}

/// The CNOT × CP product that `C·(I ⊗ H)` must equal.
pub fn cnot_times_cp() -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(4);
    m[(0, 0)] = ONE;
    m[(1, 1)] = ONE;
    m[(2, 3)] = -ONE;
    m[(3, 2)] = ONE;
    m
}

/// `(|0⟩ + |1⟩)/√2`, `(|0⟩ + i|1⟩)/√2` and friends.
pub fn qubit_state(c0: C64, c1: C64) -> StateVector {
    StateVector::new(vec![c0, c1]).normalize()
}

/// The six cardinal states `|0⟩, |1⟩, |±⟩, |±i⟩`.
pub fn cardinal_states() -> [StateVector; 6] {
    let h = C64::from(FRAC_1_SQRT_2);
    [
        StateVector::new(vec![ONE, ZERO]),
        StateVector::new(vec![ZERO, ONE]),
        StateVector::new(vec![h, h]),
        StateVector::new(vec![h, -h]),
        StateVector::new(vec![h, I * h]),
        StateVector::new(vec![h, -I * h]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eigenvalues, kron, pauli};

    /// Distance to `target` after removing the best global phase.
    fn phase_distance(a: &ComplexMatrix, target: &ComplexMatrix) -> f64 {
        let overlap = (&target.dagger() * a).trace();
        let phase = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            ONE
        };
        a.max_abs_diff(&target.scale(phase))
    }

    #[test]
    fn hadamard_spec_gives_hadamard() {
        let u = ideal_gate(&GateSpec::hadamard());
        assert!(phase_distance(&u, &pauli::hadamard()) < 1e-14);
    }

    #[test]
    fn s_spec_gives_phase_gate() {
        let u = ideal_gate(&GateSpec::s_gate());
        let s = ComplexMatrix::diagonal(&[ONE, I]);
        assert!(phase_distance(&u, &s) < 1e-14);
        // with the e^{iγ/2} prefactor it is exactly diag(1, i)
        assert!(u.max_abs_diff(&s) < 1e-14);
    }

    #[test]
    fn zero_rotation_is_identity() {
        let spec = GateSpec::new(1.1, 4.0, 0.0, 0.3).unwrap();
        assert!(ideal_gate(&spec).max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn dressed_and_axis_forms_agree() {
        for &(t, p, g) in &[(0.3, 0.0, 1.0), (2.0, 5.5, -4.0), (PI, 1.0, 3.0), (0.0, 2.0, 0.7)] {
            let spec = GateSpec::new(t, p, g, 0.0).unwrap();
            assert!(ideal_gate(&spec).max_abs_diff(&dressed_gate(&spec)) < 1e-14);
        }
    }

    #[test]
    fn frame_is_orthonormal() {
        let f = DressedFrame::new(1.234, 4.321);
        assert!((f.bright.norm() - 1.0).abs() < 1e-14);
        assert!((f.dark.norm() - 1.0).abs() < 1e-14);
        assert!(f.bright.inner(&f.dark).norm() < 1e-14);
    }

    #[test]
    fn spec_validation() {
        assert!(GateSpec::new(-0.1, 0.0, 1.0, 0.0).is_err());
        assert!(GateSpec::new(0.1, 2.0 * PI, 1.0, 0.0).is_err());
        assert!(GateSpec::new(0.1, 0.0, 2.0 * PI, 0.0).is_err());
        assert!(GateSpec::new(0.1, 0.0, f64::NAN, 0.0).is_err());
        assert!(GateSpec::new(PI, 6.0, -6.0, 100.0).is_ok());
    }

    #[test]
    fn drive_at_theta_zero_couples_only_one() {
        let spec = GateSpec::s_gate();
        let h = drive_hamiltonian(&spec, 1.0, 0.0);
        assert_eq!(h[(0, AUX_INDEX)], ZERO);
        assert!((h[(1, AUX_INDEX)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn drive_at_theta_half_pi_balances_tones() {
        let spec = GateSpec::new(PI / 2.0, 0.7, 1.0, 0.0).unwrap();
        let h = drive_hamiltonian(&spec, 1.0, 0.0);
        assert!((h[(0, AUX_INDEX)].norm() - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((h[(1, AUX_INDEX)].norm() - FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn drive_annihilates_dark_state_and_has_symmetric_spectrum() {
        let spec = GateSpec::new(2.1, 3.3, 1.0, 0.0).unwrap();
        let omega = 0.8;
        let h = drive_hamiltonian(&spec, omega, 1.7);
        assert!(h.is_hermitian(1e-15));
        assert!(h.apply(&spec.frame().dark).norm() < 1e-15);
        let e = hermitian_eigenvalues(&h).unwrap();
        for (got, want) in e.iter().zip([-omega, 0.0, omega]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn apply_error_cases() {
        let h = drive_hamiltonian(&GateSpec::hadamard(), 1.0, 0.4);
        let p = aux_projector();
        assert_eq!(apply_error(&h, &ErrorModel::NONE, 1.0, &p), h);

        let scaled = apply_error(&h, &ErrorModel::amplitude(0.1), 1.0, &p);
        assert!(scaled.max_abs_diff(&h.scale_real(1.1)) < 1e-15);

        let detuned = apply_error(&h, &ErrorModel::new(0.0, 0.1).unwrap(), 1.0, &p);
        let mut want = h.clone();
        want[(AUX_INDEX, AUX_INDEX)] -= C64::from(0.1);
        assert!(detuned.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn gate_c_times_hadamard_is_cnot_cp() {
        let c = ideal_two_qubit_gate(&TwoQubitGateSpec::gate_c());
        let prod = &c * &kron(&pauli::identity(), &pauli::hadamard());
        assert!(prod.max_abs_diff(&cnot_times_cp()) < 1e-12);
    }

    #[test]
    fn two_qubit_gate_at_eta_zero_is_zz() {
        let u = ideal_two_qubit_gate(&TwoQubitGateSpec::new(0.0, 1.3).unwrap());
        let zz = kron(&pauli::z(), &pauli::z());
        assert!(u.max_abs_diff(&zz) < 1e-15);
    }

    #[test]
    fn two_qubit_spec_phase_relation() {
        let s = TwoQubitGateSpec::new(0.5, 1.2).unwrap();
        assert!((cis(s.varphi3 - s.varphi4 + PI) - cis(-1.2)).norm() < 1e-14);
        let t = TwoQubitGateSpec::from_drive_phases(0.5, 0.3, 0.3 + PI + 1.2).unwrap();
        assert!((t.varphi - 1.2).abs() < 1e-12);
        let bad = TwoQubitGateSpec {
            varphi4: 0.0,
            ..s
        };
        assert!(bad.validate().is_err());
    }
}
