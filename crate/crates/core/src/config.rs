//! Run configuration shared by the command-line front end and JSON files.
//!
//! Every field is optional so a file and a set of flags can be layered:
//! flag values win over file values, and anything still unset falls back to
//! a default. Angles are radians throughout.

use std::f64::consts::FRAC_PI_4;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dfs::{self, DephasingModel};
use crate::dynamics::LindbladSpec;
use crate::error::{Error, Result};
use crate::model::{ErrorModel, GateSpec, TwoQubitGateSpec};
use crate::pulses::{self, Envelope, Protocol, Register, Schedule};
use crate::scans::{Axis, Cardinal, Metric, ScanFixed, ScanGrid};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    pub protocol: Option<Protocol>,
    /// `H` or `S`.
    pub gate: Option<String>,
    pub theta: Option<f64>,
    pub phi: Option<f64>,
    pub gamma_g: Option<f64>,
    pub phi0: Option<f64>,
    pub two_qubit: Option<bool>,
    pub eta: Option<f64>,
    pub varphi: Option<f64>,
    pub varphi3: Option<f64>,
    pub varphi4: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub gamma_rate: Option<f64>,
    pub dephasing: Option<DephasingModel>,
    pub encoded: Option<bool>,
    pub envelope: Option<Envelope>,
    pub samples: Option<usize>,
    /// Initial state for the state fidelity: `0`, `1`, `+`, `-`, `+i`, `-i`.
    pub initial: Option<String>,
    pub output: Option<PathBuf>,
    pub trajectory: Option<PathBuf>,
    pub axis: Option<Vec<String>>,
    /// `gate_six_state` or `state`.
    pub metric: Option<String>,
    pub jobs: Option<usize>,
}

macro_rules! layer {
    ($top:expr, $base:expr, $($field:ident),* $(,)?) => {
        RunConfig { $($field: $top.$field.or($base.$field)),* }
    };
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// `self` with every unset field taken from `base`.
    pub fn over(self, base: RunConfig) -> RunConfig {
        layer!(
            self, base, protocol, gate, theta, phi, gamma_g, phi0, two_qubit, eta, varphi,
            varphi3, varphi4, epsilon, delta, gamma_rate, dephasing, encoded, envelope, samples,
            initial, output, trajectory, axis, metric, jobs,
        )
    }

    fn gate_spec(&self) -> Result<GateSpec> {
        let base = match self.gate.as_deref() {
            Some("H" | "h" | "hadamard") => GateSpec::hadamard(),
            Some("S" | "s") => GateSpec::s_gate(),
            Some(other) => {
                return Err(Error::param(format!("unknown gate '{other}' (use H or S)")))
            }
            None => GateSpec::s_gate(),
        };
        GateSpec::new(
            self.theta.unwrap_or(base.theta),
            self.phi.unwrap_or(base.phi),
            self.gamma_g.unwrap_or(base.gamma_g),
            self.phi0.unwrap_or(base.phi0),
        )
    }

    fn pair_spec(&self) -> Result<TwoQubitGateSpec> {
        let eta = self.eta.unwrap_or(FRAC_PI_4);
        match (self.varphi3, self.varphi4) {
            (None, None) => TwoQubitGateSpec::new(eta, self.varphi.unwrap_or(0.0)),
            (Some(p3), Some(p4)) => {
                let spec = TwoQubitGateSpec::from_drive_phases(eta, p3, p4)?;
                if let Some(v) = self.varphi {
                    TwoQubitGateSpec { varphi: v, ..spec }.validate()?;
                }
                Ok(spec)
            }
            _ => Err(Error::param("give both varphi3 and varphi4, or neither")),
        }
    }

    pub fn resolve(&self) -> Result<ResolvedRun> {
        let two_qubit = self.two_qubit.unwrap_or(false);
        let target = if two_qubit {
            if self.gate.is_some() || self.theta.is_some() || self.gamma_g.is_some() {
                return Err(Error::param(
                    "single-qubit gate parameters cannot be combined with two-qubit mode",
                ));
            }
            RunTarget::Pair(self.pair_spec()?)
        } else {
            if self.eta.is_some() || self.varphi.is_some() || self.varphi3.is_some() {
                return Err(Error::param("eta/varphi need two-qubit mode"));
            }
            RunTarget::Single(self.gate_spec()?)
        };
        let gamma_rate = self.gamma_rate.unwrap_or(0.0);
        if !(gamma_rate.is_finite() && gamma_rate >= 0.0) {
            return Err(Error::param("gamma-rate must be non-negative"));
        }
        let samples = self.samples.unwrap_or(201);
        if samples < 2 {
            return Err(Error::param("samples must be at least 2"));
        }
        if self.jobs == Some(0) {
            return Err(Error::param("jobs must be at least 1"));
        }
        let initial = self.initial.as_deref().map(str::parse).transpose()?;
        Ok(ResolvedRun {
            protocol: self.protocol.unwrap_or(Protocol::Dcnhqc),
            target,
            envelope: self.envelope.unwrap_or_default(),
            encoded: self.encoded.unwrap_or(false),
            error: ErrorModel::new(self.epsilon.unwrap_or(0.0), self.delta.unwrap_or(0.0))?,
            gamma_rate,
            dephasing: self.dephasing.unwrap_or_default(),
            samples,
            initial,
            jobs: self.jobs,
        })
    }

    pub fn scan_grid(&self) -> Result<ScanGrid> {
        let run = self.resolve()?;
        let gate = match run.target {
            RunTarget::Single(g) => g,
            RunTarget::Pair(_) => {
                return Err(Error::Unsupported("scans cover single-qubit gates".into()))
            }
        };
        if run.dephasing != DephasingModel::default() {
            return Err(Error::Unsupported(
                "scans use the default dephasing model".into(),
            ));
        }
        let axes = self
            .axis
            .as_deref()
            .unwrap_or_default()
            .iter()
            .map(|a| a.parse::<Axis>())
            .collect::<Result<Vec<_>>>()?;
        let metric = match self.metric.as_deref() {
            None | Some("gate_six_state") => Metric::GateSixState,
            Some("state") => Metric::State {
                initial: run.initial.unwrap_or_else(|| default_initial(&gate)),
            },
            Some(other) => return Err(Error::param(format!("unknown metric '{other}'"))),
        };
        ScanGrid::new(
            axes,
            ScanFixed {
                protocol: run.protocol,
                gate,
                encoded: run.encoded,
                envelope: run.envelope,
                epsilon: run.error.epsilon,
                delta: run.error.delta,
                gamma_rate: run.gamma_rate,
            },
            metric,
        )
    }
}

/// `|+⟩` for diagonal gates (which leave `|0⟩` alone), `|0⟩` otherwise.
pub fn default_initial(gate: &GateSpec) -> Cardinal {
    if gate.theta == 0.0 || gate.theta == std::f64::consts::PI {
        Cardinal::Plus
    } else {
        Cardinal::Zero
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RunTarget {
    Single(GateSpec),
    Pair(TwoQubitGateSpec),
}

/// A fully defaulted and validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedRun {
    pub protocol: Protocol,
    pub target: RunTarget,
    pub envelope: Envelope,
    pub encoded: bool,
    pub error: ErrorModel,
    pub gamma_rate: f64,
    pub dephasing: DephasingModel,
    pub samples: usize,
    pub initial: Option<Cardinal>,
    pub jobs: Option<usize>,
}

impl ResolvedRun {
    pub fn schedule(&self) -> Result<Schedule> {
        let s = match &self.target {
            RunTarget::Single(g) => pulses::build(self.protocol, g),
            RunTarget::Pair(p) => pulses::build_two_qubit(p, self.protocol),
        }
        .with_envelope(self.envelope);
        if self.encoded {
            s.encoded()
        } else {
            Ok(s)
        }
    }

    pub fn noise(&self, register: Register) -> Result<LindbladSpec> {
        match register {
            Register::EncodedQubit => dfs::physical_noise(3, self.gamma_rate, self.dephasing),
            Register::EncodedPair => dfs::physical_noise(6, self.gamma_rate, self.dephasing),
            r => LindbladSpec::for_register(r, self.gamma_rate),
        }
    }
}
