//! Pulse schedules for single-loop NHQC and its dynamically corrected variant.
//!
//! A schedule is an ordered list of drive segments. Each segment applies
//! `Ω(t) e^{−i·phase}|b⟩⟨a| + h.c.` for a prescribed pulse area. Only the
//! area of a segment is constrained, so the envelope is pluggable.
//!
//! NHQC takes two `π/2` segments with phases `φ₀` and `φ₀ + π − γ_g`.
//! DCNHQC splits each half at its midpoint and inserts a `π/2` corrector,
//! with phase `φ₀ + π/2` in the first half and `φ₀ − γ_g − π/2` in the
//! second. The correctors' dynamical phases cancel, so the error-free gate is
//! unchanged and amplitude errors drop to fourth order.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::dfs::{self, LogicalEncoding};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, StateVector, ZERO};
use crate::model::{self, DressedFrame, GateSpec, TwoQubitGateSpec, AUX_INDEX};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Nhqc,
    Dcnhqc,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Nhqc => "nhqc",
            Protocol::Dcnhqc => "dcnhqc",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nhqc" => Ok(Protocol::Nhqc),
            "dcnhqc" => Ok(Protocol::Dcnhqc),
            other => Err(Error::Parse(format!("unknown protocol '{other}'"))),
        }
    }
}

/// Time profile of a segment's drive amplitude, peaking at `Ω_m`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Envelope {
    /// `Ω(t) = Ω_m`
    #[default]
    Square,
    /// `Ω(t) = Ω_m sin(πt/τ)`
    Sine,
}

impl Envelope {
    /// Segment length needed to reach `area` with peak amplitude `omega_m`.
    pub fn duration(self, area: f64, omega_m: f64) -> f64 {
        match self {
            Envelope::Square => area / omega_m,
            Envelope::Sine => PI * area / (2.0 * omega_m),
        }
    }

    pub fn amplitude(self, t: f64, duration: f64, omega_m: f64) -> f64 {
        match self {
            Envelope::Square => omega_m,
            Envelope::Sine => omega_m * (PI * t / duration).sin(),
        }
    }

    /// `∫_{t0}^{t1} Ω(t) dt`
    pub fn area_between(self, t0: f64, t1: f64, duration: f64, omega_m: f64) -> f64 {
        match self {
            Envelope::Square => omega_m * (t1 - t0),
            Envelope::Sine => {
                let k = PI / duration;
                omega_m * ((k * t0).cos() - (k * t1).cos()) / k
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSegment {
    /// `∫Ω dt` over the segment, radians.
    pub area: f64,
    /// Overall phase of the `|b⟩⟨a|` coupling.
    pub phase: f64,
    /// Length in units of `1/Ω_m`.
    pub duration: f64,
    #[serde(default)]
    pub envelope: Envelope,
}

/// Hilbert space a schedule acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Register {
    /// Bare V-type system `{|0⟩, |1⟩, |a⟩}`.
    ThreeLevel,
    /// Three physical qubits hosting one logical qubit in `S₁` (dim 8).
    EncodedQubit,
    /// Six-dimensional logical space `{|00⟩, |01⟩, |A₁⟩, |10⟩, |11⟩, |A₂⟩}`.
    LogicalPair,
    /// Six physical qubits hosting two logical qubits in `S₂` (dim 64).
    EncodedPair,
}

impl Register {
    pub fn dim(self) -> usize {
        match self {
            Register::ThreeLevel => 3,
            Register::EncodedQubit => 8,
            Register::LogicalPair => 6,
            Register::EncodedPair => 64,
        }
    }

    pub fn is_single_qubit(self) -> bool {
        matches!(self, Register::ThreeLevel | Register::EncodedQubit)
    }

    pub fn is_encoded(self) -> bool {
        matches!(self, Register::EncodedQubit | Register::EncodedPair)
    }

    /// Register positions of the computational (logical) basis states, in
    /// `|0⟩, |1⟩` or `|00⟩, |01⟩, |10⟩, |11⟩` order.
    pub fn logical_indices(self) -> Vec<usize> {
        match self {
            Register::ThreeLevel => vec![0, 1],
            Register::LogicalPair => model::PAIR_LOGICAL_INDICES.to_vec(),
            Register::EncodedQubit => LogicalEncoding::single().computational_indices(),
            Register::EncodedPair => LogicalEncoding::pair().computational_indices(),
        }
    }

    /// Register positions of the auxiliary state(s).
    pub fn aux_indices(self) -> Vec<usize> {
        match self {
            Register::ThreeLevel => vec![AUX_INDEX],
            Register::LogicalPair => model::PAIR_AUX_INDICES.to_vec(),
            Register::EncodedQubit => LogicalEncoding::single().aux_indices(),
            Register::EncodedPair => LogicalEncoding::pair().aux_indices(),
        }
    }

    /// Maps a qubit (dim 2) or two-qubit (dim 4) state into the register.
    pub fn embed(self, logical: &StateVector) -> Result<StateVector> {
        let idx = self.logical_indices();
        if logical.dim() != idx.len() {
            return Err(Error::DimensionMismatch {
                expected: idx.len(),
                found: logical.dim(),
            });
        }
        let mut amps = vec![ZERO; self.dim()];
        for (k, &pos) in idx.iter().enumerate() {
            amps[pos] = logical[k];
        }
        Ok(StateVector::new(amps))
    }

    /// Projector the detuning error acts on: `|a⟩⟨a|` for the bare system,
    /// the identity on the decoherence-free subspace for encoded ones.
    pub fn detuning_projector(self) -> ComplexMatrix {
        match self {
            Register::ThreeLevel => model::aux_projector(),
            Register::LogicalPair => ComplexMatrix::identity(6),
            Register::EncodedQubit => LogicalEncoding::single().projector(),
            Register::EncodedPair => LogicalEncoding::pair().projector(),
        }
    }
}

/// Gate a schedule implements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    Single(GateSpec),
    Pair(TwoQubitGateSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub protocol: Protocol,
    pub target: Target,
    pub register: Register,
    pub dim: usize,
    pub omega_m: f64,
    pub segments: Vec<PulseSegment>,
}

/// `(area, phase)` pattern for a gate with base phase `phi0` and geometric
/// phase `gamma_g`.
fn phase_pattern(protocol: Protocol, phi0: f64, gamma_g: f64) -> Vec<(f64, f64)> {
    let back = phi0 + PI - gamma_g;
    match protocol {
        Protocol::Nhqc => vec![(FRAC_PI_2, phi0), (FRAC_PI_2, back)],
        Protocol::Dcnhqc => vec![
            (FRAC_PI_4, phi0),
            (FRAC_PI_2, phi0 + FRAC_PI_2),
            (FRAC_PI_4, phi0),
            (FRAC_PI_4, back),
            (FRAC_PI_2, phi0 - gamma_g - FRAC_PI_2),
            (FRAC_PI_4, back),
        ],
    }
}

fn square_segments(pattern: Vec<(f64, f64)>, omega_m: f64) -> Vec<PulseSegment> {
    pattern
        .into_iter()
        .map(|(area, phase)| PulseSegment {
            area,
            phase,
            duration: Envelope::Square.duration(area, omega_m),
            envelope: Envelope::Square,
        })
        .collect()
}

/// Conventional single-loop NHQC on the bare three-level system.
pub fn build_nhqc(spec: &GateSpec) -> Schedule {
    build(Protocol::Nhqc, spec)
}

/// Dynamically corrected NHQC on the bare three-level system.
pub fn build_dcnhqc(spec: &GateSpec) -> Schedule {
    build(Protocol::Dcnhqc, spec)
}

pub fn build(protocol: Protocol, spec: &GateSpec) -> Schedule {
    Schedule {
        protocol,
        target: Target::Single(*spec),
        register: Register::ThreeLevel,
        dim: Register::ThreeLevel.dim(),
        omega_m: 1.0,
        segments: square_segments(phase_pattern(protocol, spec.phi0, spec.gamma_g), 1.0),
    }
}

/// Two-qubit holonomic gate on the six-dimensional logical space.
///
/// Both three-level blocks are driven at once with geometric phase `π`; the
/// segment phase is the phase of the `g₁` coupling (reference `φ₃`), and the
/// `g₂` coupling follows it with the fixed offset `φ₄ − φ₃`.
pub fn build_two_qubit(spec: &TwoQubitGateSpec, protocol: Protocol) -> Schedule {
    Schedule {
        protocol,
        target: Target::Pair(*spec),
        register: Register::LogicalPair,
        dim: Register::LogicalPair.dim(),
        omega_m: 1.0,
        segments: square_segments(phase_pattern(protocol, spec.varphi3, PI), 1.0),
    }
}

impl Schedule {
    pub fn dim(&self) -> usize {
        self.register.dim()
    }

    pub fn total_area(&self) -> f64 {
        self.segments.iter().map(|s| s.area).sum()
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Start time of every segment followed by the total duration.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        let mut t = 0.0;
        out.push(t);
        for s in &self.segments {
            t += s.duration;
            out.push(t);
        }
        out
    }

    pub fn gate_spec(&self) -> Option<&GateSpec> {
        match &self.target {
            Target::Single(s) => Some(s),
            Target::Pair(_) => None,
        }
    }

    pub fn pair_spec(&self) -> Option<&TwoQubitGateSpec> {
        match &self.target {
            Target::Pair(s) => Some(s),
            Target::Single(_) => None,
        }
    }

    pub fn is_square(&self) -> bool {
        self.segments.iter().all(|s| s.envelope == Envelope::Square)
    }

    /// Moves the schedule from the logical register onto physical qubits.
    pub fn encoded(mut self) -> Result<Self> {
        self.register = match self.register {
            Register::ThreeLevel => Register::EncodedQubit,
            Register::LogicalPair => Register::EncodedPair,
            r => return Err(Error::Unsupported(format!("{r:?} is already encoded"))),
        };
        self.dim = self.register.dim();
        Ok(self)
    }

    /// Replaces every envelope, keeping the areas.
    pub fn with_envelope(mut self, envelope: Envelope) -> Self {
        for s in &mut self.segments {
            s.envelope = envelope;
            s.duration = envelope.duration(s.area, self.omega_m);
        }
        self
    }

    /// Rescales the peak amplitude, keeping the areas.
    pub fn with_omega_m(mut self, omega_m: f64) -> Self {
        self.omega_m = omega_m;
        for s in &mut self.segments {
            s.duration = s.envelope.duration(s.area, omega_m);
        }
        self
    }

    /// Error-free Hamiltonian of `segment` at instantaneous amplitude `omega`.
    pub fn hamiltonian(&self, segment: &PulseSegment, omega: f64) -> ComplexMatrix {
        match (&self.target, self.register) {
            (Target::Single(spec), Register::ThreeLevel) => {
                model::drive_hamiltonian(spec, omega, segment.phase)
            }
            (Target::Single(spec), Register::EncodedQubit) => {
                let (s, c) = (spec.theta / 2.0).sin_cos();
                dfs::physical_hamiltonian_1(
                    omega * s,
                    omega * c,
                    segment.phase,
                    segment.phase - spec.phi + PI,
                )
            }
            (Target::Pair(spec), register) => {
                let (g1, g2) = spec.couplings();
                let p3 = segment.phase;
                let p4 = segment.phase - spec.varphi3 + spec.varphi4;
                if register == Register::EncodedPair {
                    dfs::physical_hamiltonian_2(omega * g1, omega * g2, p3, p4)
                } else {
                    dfs::logical_pair_hamiltonian(omega * g1, omega * g2, p3, p4)
                }
            }
            (target, register) => unreachable!("validated schedule pairs {target:?} with {register:?}"),
        }
    }

    /// Bright and auxiliary states embedded in the register.
    pub fn bright_and_aux(&self) -> Result<(StateVector, StateVector)> {
        let spec = self.gate_spec().ok_or_else(|| {
            Error::Unsupported("bright state is only defined for single-qubit gates".into())
        })?;
        let frame: DressedFrame = spec.frame();
        let (bright, _) = frame.qubit_bright_dark();
        let bright = self.register.embed(&bright)?;
        let aux = StateVector::basis(self.dim(), self.register.aux_indices()[0]);
        Ok((bright, aux))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_m.is_finite() && self.omega_m > 0.0) {
            return Err(Error::param(format!("omega_m = {} must be positive", self.omega_m)));
        }
        if self.dim != self.register.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.register.dim(),
                found: self.dim,
            });
        }
        match (&self.target, self.register) {
            (Target::Single(spec), r) if r.is_single_qubit() => spec.validate()?,
            (Target::Pair(spec), r) if !r.is_single_qubit() => spec.validate()?,
            (_, r) => {
                return Err(Error::param(format!(
                    "target kind does not match register {r:?}"
                )))
            }
        }
        if self.segments.is_empty() {
            return Err(Error::param("schedule has no segments"));
        }
        for (k, s) in self.segments.iter().enumerate() {
            if !(s.area.is_finite() && s.area > 0.0) {
                return Err(Error::param(format!("segment {k}: area must be positive")));
            }
            if !s.phase.is_finite() {
                return Err(Error::param(format!("segment {k}: non-finite phase")));
            }
            let expected = s.envelope.duration(s.area, self.omega_m);
            if !s.duration.is_finite() || (s.duration - expected).abs() > 1e-9 * expected.max(1.0)
            {
                return Err(Error::param(format!(
                    "segment {k}: duration {} inconsistent with area {} (expected {expected})",
                    s.duration, s.area
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and validates a schedule.
    pub fn from_json(text: &str) -> Result<Self> {
        let schedule: Schedule = serde_json::from_str(text)?;
        schedule.validate()?;
        Ok(schedule)
    }
}
