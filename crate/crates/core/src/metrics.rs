//! Gate and state fidelities.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::dynamics::{
    lindblad_final_states, propagate_unitary, DensityMatrix, IntegratorStats, LindbladSpec,
};
use crate::error::{Error, Result};
use crate::linalg::{cis, ComplexMatrix, StateVector, C64};
use crate::model::{self, ErrorModel, GateSpec};
use crate::pulses::{self, Protocol, Schedule};

/// Slack allowed above one (or below zero) before a fidelity is clipped.
const CLIP_ALLOWANCE: f64 = 1e-9;

/// Infidelities below this are treated as numerically zero in fits.
pub const INFIDELITY_FLOOR: f64 = 1e-14;

fn clip(f: f64) -> Result<f64> {
    if !f.is_finite() {
        return Err(Error::NonFinite { context: "fidelity" });
    }
    if !(-CLIP_ALLOWANCE..=1.0 + CLIP_ALLOWANCE).contains(&f) {
        return Err(Error::InvalidDensityMatrix(format!(
            "fidelity {f} outside [0, 1]"
        )));
    }
    Ok(f.clamp(0.0, 1.0))
}

/// `⟨ψ|ρ|ψ⟩` for a normalized target.
pub fn state_fidelity(rho: &DensityMatrix, target: &StateVector) -> Result<f64> {
    let norm = target.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { norm });
    }
    clip(rho.expectation(target)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityKind {
    State,
    GateSixState,
    TraceDressed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FidelityReport {
    pub kind: FidelityKind,
    pub value: f64,
    pub infidelity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorStats>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl FidelityReport {
    pub fn new(kind: FidelityKind, value: f64) -> Self {
        Self {
            kind,
            value,
            infidelity: 1.0 - value,
            integrator: None,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }
}

fn single_target(schedule: &Schedule) -> Result<&GateSpec> {
    schedule.gate_spec().ok_or_else(|| {
        Error::Unsupported("six-state fidelity needs a single-qubit schedule".into())
    })
}

/// Initial and ideal final register states for the six cardinal inputs.
fn six_state_pairs(schedule: &Schedule) -> Result<Vec<(StateVector, StateVector)>> {
    let u = model::ideal_gate(single_target(schedule)?);
    model::cardinal_states()
        .iter()
        .map(|psi| {
            Ok((
                schedule.register.embed(psi)?,
                schedule.register.embed(&u.apply(psi))?,
            ))
        })
        .collect()
}

/// Six-state average for a closed-system propagator on the register.
pub fn unitary_six_state_fidelity(schedule: &Schedule, propagator: &ComplexMatrix) -> Result<f64> {
    if propagator.dim() != schedule.dim() {
        return Err(Error::DimensionMismatch {
            expected: schedule.dim(),
            found: propagator.dim(),
        });
    }
    let pairs = six_state_pairs(schedule)?;
    let total: f64 = pairs
        .iter()
        .map(|(psi, target)| target.inner(&propagator.apply(psi)).norm_sqr())
        .sum();
    clip(total / pairs.len() as f64)
}

/// Average of `⟨Uψ|ρ_f|Uψ⟩` over `|0⟩, |1⟩, |±⟩, |±i⟩`, with the integrator
/// statistics when the master equation was solved.
pub fn six_state_report(
    schedule: &Schedule,
    err: &ErrorModel,
    noise: &LindbladSpec,
) -> Result<(f64, Option<IntegratorStats>)> {
    if noise.is_noiseless() {
        let u = propagate_unitary(schedule, err)?;
        return Ok((unitary_six_state_fidelity(schedule, &u)?, None));
    }
    let pairs = six_state_pairs(schedule)?;
    let rho0s = pairs
        .iter()
        .map(|(psi, _)| DensityMatrix::from_pure(psi))
        .collect::<Result<Vec<_>>>()?;
    let (finals, stats) = lindblad_final_states(schedule, err, noise, &rho0s)?;
    let mut total = 0.0;
    for (rho, (_, target)) in finals.iter().zip(&pairs) {
        total += state_fidelity(rho, target)?;
    }
    Ok((clip(total / pairs.len() as f64)?, Some(stats)))
}

pub fn gate_fidelity_six_state(
    schedule: &Schedule,
    err: &ErrorModel,
    noise: &LindbladSpec,
) -> Result<f64> {
    six_state_report(schedule, err, noise).map(|(f, _)| f)
}

/// `|Tr(U_ideal† U)| / 2` over the dressed qubit `{|b⟩, |d⟩}`.
pub fn simulated_trace_fidelity(schedule: &Schedule, err: &ErrorModel) -> Result<f64> {
    let spec = single_target(schedule)?;
    let u = propagate_unitary(schedule, err)?;
    let frame = spec.frame();
    let (b, d) = frame.qubit_bright_dark();
    let b = schedule.register.embed(&b)?;
    let d = schedule.register.embed(&d)?;
    let m_bb = b.inner(&u.apply(&b));
    let m_dd = d.inner(&u.apply(&d));
    let tr = cis(-spec.gamma_g) * m_bb + m_dd;
    clip(tr.norm() / 2.0)
}

/// Closed-form dressed trace fidelity under a pure amplitude error `ε`.
pub fn trace_fidelity_dressed(protocol: Protocol, gamma_g: f64, epsilon: f64) -> f64 {
    let m = bright_coefficient_closed_form(protocol, gamma_g, epsilon);
    (cis(-gamma_g) * m + 1.0).norm() / 2.0
}

/// `⟨b|U|b⟩` in closed form under a pure amplitude error, `μ = 1 + ε`.
pub fn bright_coefficient_closed_form(protocol: Protocol, gamma_g: f64, epsilon: f64) -> C64 {
    let mu = 1.0 + epsilon;
    let e = cis(gamma_g);
    let (s, c) = (mu * PI / 2.0).sin_cos();
    match protocol {
        Protocol::Nhqc => c * c + s * s * e,
        Protocol::Dcnhqc => c.powi(4) + (s * s + 0.25 * (mu * PI).sin().powi(2)) * e,
    }
}

/// Leading-order dressed trace fidelity: `1 − ε²π²(1 − cos γ)/8` (NHQC) or
/// `1 − ε⁴π⁴(1 − cos γ)/32` (DCNHQC).
pub fn trace_fidelity_series(protocol: Protocol, gamma_g: f64, epsilon: f64) -> f64 {
    let k = 1.0 - gamma_g.cos();
    match protocol {
        Protocol::Nhqc => 1.0 - (epsilon * PI).powi(2) * k / 8.0,
        Protocol::Dcnhqc => 1.0 - (epsilon * PI).powi(4) * k / 32.0,
    }
}

/// Least-squares slope of `log₁₀(1 − F)` against `log₁₀ ε` for the
/// simulated dressed trace fidelity of a phase gate with geometric phase
/// `gamma_g`.
pub fn error_scaling_order(protocol: Protocol, gamma_g: f64, epsilons: &[f64]) -> Result<f64> {
    if epsilons.len() < 5 {
        return Err(Error::param("need at least five epsilon values"));
    }
    if !epsilons.iter().all(|e| e.is_finite() && *e > 0.0) {
        return Err(Error::param("epsilon values must be positive"));
    }
    let lo = epsilons.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = epsilons.iter().copied().fold(0.0, f64::max);
    if hi / lo < 10.0 * (1.0 - 1e-12) {
        return Err(Error::param("epsilon grid must span at least one decade"));
    }
    let spec = GateSpec::new(0.0, 0.0, gamma_g, 0.0)?;
    let schedule = pulses::build(protocol, &spec);
    let mut xs = Vec::with_capacity(epsilons.len());
    let mut ys = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let f = simulated_trace_fidelity(&schedule, &ErrorModel::amplitude(eps))?;
        let infidelity = 1.0 - f;
        if infidelity < INFIDELITY_FLOOR {
            return Err(Error::DegenerateFit {
                epsilon: eps,
                infidelity,
            });
        }
        xs.push(eps.log10());
        ys.push(infidelity.log10());
    }
    Ok(least_squares_slope(&xs, &ys))
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::{build_dcnhqc, build_nhqc};

    #[test]
    fn ideal_gates_have_unit_fidelity() {
        for spec in [GateSpec::hadamard(), GateSpec::s_gate()] {
            for s in [build_nhqc(&spec), build_dcnhqc(&spec)] {
                let f = gate_fidelity_six_state(&s, &ErrorModel::NONE, &LindbladSpec::noiseless(3))
                    .unwrap();
                assert!(f > 1.0 - 1e-12, "{f}");
            }
        }
    }

    #[test]
    fn simulated_trace_fidelity_matches_closed_form() {
        for protocol in [Protocol::Nhqc, Protocol::Dcnhqc] {
            for &gamma in &[0.3, PI / 2.0, 2.5] {
                let spec = GateSpec::new(0.0, 0.0, gamma, 0.0).unwrap();
                let s = pulses::build(protocol, &spec);
                let eps = 0.07;
                let sim = simulated_trace_fidelity(&s, &ErrorModel::amplitude(eps)).unwrap();
                let exact = trace_fidelity_dressed(protocol, gamma, eps);
                assert!((sim - exact).abs() < 1e-12, "{protocol:?} {gamma}");
            }
        }
    }

    #[test]
    fn series_is_leading_order() {
        let exact = trace_fidelity_dressed(Protocol::Nhqc, 1.0, 1e-3);
        let series = trace_fidelity_series(Protocol::Nhqc, 1.0, 1e-3);
        assert!(((1.0 - exact) / (1.0 - series) - 1.0).abs() < 1e-4);
        let exact = trace_fidelity_dressed(Protocol::Dcnhqc, 1.0, 1e-2);
        let series = trace_fidelity_series(Protocol::Dcnhqc, 1.0, 1e-2);
        assert!(((1.0 - exact) / (1.0 - series) - 1.0).abs() < 1e-2);
    }

    #[test]
    fn scaling_fit_rejects_bad_grids() {
        assert!(error_scaling_order(Protocol::Nhqc, 1.0, &[0.01, 0.02]).is_err());
        let narrow = [0.01, 0.012, 0.014, 0.016, 0.018];
        assert!(error_scaling_order(Protocol::Nhqc, 1.0, &narrow).is_err());
        let grid = [3e-3, 6e-3, 1e-2, 2e-2, 3e-2];
        assert!(matches!(
            error_scaling_order(Protocol::Nhqc, 0.0, &grid),
            Err(Error::DegenerateFit { .. })
        ));
    }

    #[test]
    fn state_fidelity_requires_normalized_target() {
        let rho = DensityMatrix::from_pure(&StateVector::basis(3, 0)).unwrap();
        let bad = StateVector::new(vec![C64::from(2.0), C64::from(0.0), C64::from(0.0)]);
        assert!(matches!(
            state_fidelity(&rho, &bad),
            Err(Error::NotNormalized { .. })
        ));
    }
}
