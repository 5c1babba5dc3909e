//! Closed- and open-system time evolution under a pulse schedule.
//!
//! The master equation is
//! `ρ̇ = −i[H, ρ] + ½ Σ_k Γ_k (2 L_k ρ L_k† − {L_k† L_k, ρ})`
//! with `H = (1 + ε) H_seg(t) − δ Ω_m P`. It is integrated with fixed-step
//! RK4 (`h ≤ 10⁻³/Ω_m`). Every segment is integrated twice, at `h` and
//! `h/2`, and the run fails with [`Error::StepSize`] if the two disagree by
//! more than the tolerance.
//!
//! For small registers with square envelopes the generator is constant over
//! a segment, so one RK4 step is the fixed polynomial
//! `T(hℒ) = Σ_{k≤4} (hℒ)^k / k!` of the Liouvillian. It is built once per
//! segment and raised to the step count by repeated squaring. Larger
//! registers step directly with sparse products.

use std::collections::HashMap;

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, ComplexMatrix, StateVector, C64, I, ONE, ZERO};
use crate::model::{self, ErrorModel};
use crate::pulses::{Envelope, Register, Schedule};

pub const TRACE_TOLERANCE: f64 = 1e-9;
pub const HERMITICITY_TOLERANCE: f64 = 1e-9;
pub const POSITIVITY_TOLERANCE: f64 = 1e-8;

/// Largest superoperator dimension (`dim²`) stepped through the dense
/// Liouvillian.
const SUPEROPERATOR_MAX_DIM: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorOptions {
    /// Upper bound on the RK4 step, in units of `1/Ω_m`.
    pub max_step: f64,
    /// Allowed max-entry deviation between the `h` and `h/2` runs at the end
    /// of each segment.
    pub tolerance: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            max_step: 1e-3,
            tolerance: 1e-9,
        }
    }
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite
/// (all within the module tolerances).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

struct Checks {
    trace_deviation: f64,
    hermiticity_error: f64,
    min_eigenvalue: f64,
}

fn inspect(m: &ComplexMatrix) -> Result<Checks> {
    if !m.is_finite() {
        return Err(Error::NonFinite {
            context: "density matrix",
        });
    }
    let hermiticity_error = m.hermiticity_error();
    if hermiticity_error > HERMITICITY_TOLERANCE {
        return Err(Error::InvalidDensityMatrix(format!(
            "hermiticity error {hermiticity_error:.3e}"
        )));
    }
    let trace_deviation = (m.trace() - ONE).norm();
    if trace_deviation > TRACE_TOLERANCE {
        return Err(Error::InvalidDensityMatrix(format!(
            "trace deviates from one by {trace_deviation:.3e}"
        )));
    }
    let symmetric = (m + &m.dagger()).scale_real(0.5);
    let min_eigenvalue = hermitian_eigenvalues(&symmetric)?[0];
    if min_eigenvalue < -POSITIVITY_TOLERANCE {
        return Err(Error::InvalidDensityMatrix(format!(
            "negative eigenvalue {min_eigenvalue:.3e}"
        )));
    }
    Ok(Checks {
        trace_deviation,
        hermiticity_error,
        min_eigenvalue,
    })
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        inspect(&matrix)?;
        Ok(Self { matrix })
    }

    pub fn from_pure(state: &StateVector) -> Result<Self> {
        let norm = state.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { norm });
        }
        Self::new(state.projector())
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }

    /// `⟨ψ|ρ|ψ⟩`
    pub fn expectation(&self, state: &StateVector) -> Result<f64> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: state.dim(),
            });
        }
        Ok(state.inner(&self.matrix.apply(state)).re)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(hermitian_eigenvalues(&self.matrix)?[0])
    }
}

#[derive(Clone, Debug)]
pub struct LindbladChannel {
    pub label: String,
    pub rate: f64,
    pub operator: ComplexMatrix,
}

impl LindbladChannel {
    pub fn new(label: impl Into<String>, rate: f64, operator: ComplexMatrix) -> Self {
        Self {
            label: label.into(),
            rate,
            operator,
        }
    }
}

/// Collapse channels for the master equation.
#[derive(Clone, Debug)]
pub struct LindbladSpec {
    dim: usize,
    channels: Vec<LindbladChannel>,
}

impl LindbladSpec {
    pub fn new(dim: usize, channels: Vec<LindbladChannel>) -> Result<Self> {
        for c in &channels {
            if !(c.rate.is_finite() && c.rate >= 0.0) {
                return Err(Error::param(format!(
                    "channel {}: rate {} must be non-negative",
                    c.label, c.rate
                )));
            }
            if c.operator.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: c.operator.dim(),
                });
            }
            if !c.operator.is_finite() {
                return Err(Error::NonFinite {
                    context: "collapse operator",
                });
            }
        }
        Ok(Self { dim, channels })
    }

    pub fn noiseless(dim: usize) -> Self {
        Self {
            dim,
            channels: Vec::new(),
        }
    }

    /// Decay `|a⟩⟨0|`, `|a⟩⟨1|` and dephasing `(|j⟩⟨j| − |a⟩⟨a|)/2`, `j = 0, 1`,
    /// all at rate `gamma`.
    pub fn three_level(gamma: f64) -> Result<Self> {
        let a = model::AUX_INDEX;
        let mut channels = Vec::new();
        for j in 0..2 {
            let mut decay = ComplexMatrix::zeros(3);
            decay[(a, j)] = ONE;
            channels.push(LindbladChannel::new(format!("decay_{j}"), gamma, decay));
        }
        for j in 0..2 {
            let mut deph = ComplexMatrix::zeros(3);
            deph[(j, j)] = C64::from(0.5);
            deph[(a, a)] = C64::from(-0.5);
            channels.push(LindbladChannel::new(format!("dephasing_{j}"), gamma, deph));
        }
        Self::new(3, channels)
    }

    /// Uniform-rate noise appropriate to a register. Encoded registers use
    /// per-qubit decay and collective dephasing.
    pub fn for_register(register: Register, gamma: f64) -> Result<Self> {
        match register {
            Register::ThreeLevel => Self::three_level(gamma),
            Register::EncodedQubit => {
                crate::dfs::physical_noise(3, gamma, crate::dfs::DephasingModel::default())
            }
            Register::EncodedPair => {
                crate::dfs::physical_noise(6, gamma, crate::dfs::DephasingModel::default())
            }
            Register::LogicalPair if gamma == 0.0 => Ok(Self::noiseless(6)),
            Register::LogicalPair => Err(Error::Unsupported(
                "noise on the logical pair space is defined on physical qubits; encode the schedule"
                    .into(),
            )),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn channels(&self) -> &[LindbladChannel] {
        &self.channels
    }

    pub fn is_noiseless(&self) -> bool {
        self.channels.iter().all(|c| c.rate == 0.0)
    }
}

/// Numerical health of a Lindblad run, aggregated over all recorded samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IntegratorStats {
    pub steps: usize,
    pub max_trace_deviation: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: f64,
    pub max_richardson_deviation: f64,
}

impl Default for IntegratorStats {
    fn default() -> Self {
        Self {
            steps: 0,
            max_trace_deviation: 0.0,
            max_hermiticity_error: 0.0,
            min_eigenvalue: 1.0,
            max_richardson_deviation: 0.0,
        }
    }
}

impl IntegratorStats {
    pub fn merge(&mut self, other: &IntegratorStats) {
        self.steps += other.steps;
        self.max_trace_deviation = self.max_trace_deviation.max(other.max_trace_deviation);
        self.max_hermiticity_error = self.max_hermiticity_error.max(other.max_hermiticity_error);
        self.min_eigenvalue = self.min_eigenvalue.min(other.min_eigenvalue);
        self.max_richardson_deviation = self
            .max_richardson_deviation
            .max(other.max_richardson_deviation);
    }

    fn record(&mut self, c: &Checks) {
        self.max_trace_deviation = self.max_trace_deviation.max(c.trace_deviation);
        self.max_hermiticity_error = self.max_hermiticity_error.max(c.hermiticity_error);
        self.min_eigenvalue = self.min_eigenvalue.min(c.min_eigenvalue);
    }
}

#[derive(Clone, Debug)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub stats: IntegratorStats,
}

impl TimeSeries {
    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("a time series holds at least two samples")
    }
}

fn check_error_model(err: &ErrorModel) -> Result<()> {
    if err.epsilon.is_finite() && err.delta.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            context: "error model",
        })
    }
}

/// Time-independent part of the Hamiltonian added by the detuning error.
fn detuning_term(schedule: &Schedule, err: &ErrorModel) -> ComplexMatrix {
    schedule
        .register
        .detuning_projector()
        .scale_real(-err.delta * schedule.omega_m)
}

/// `(1 + ε) H_seg` at unit amplitude.
fn unit_drive(schedule: &Schedule, segment: usize, err: &ErrorModel) -> ComplexMatrix {
    schedule
        .hamiltonian(&schedule.segments[segment], 1.0)
        .scale_real(1.0 + err.epsilon)
}

/// Unitary for local times `[t0, t1]` of one segment. Shaped envelopes are
/// sliced at `10⁻³/Ω_m`, with each slice carrying its exact pulse area.
fn piece_propagator(
    schedule: &Schedule,
    segment: usize,
    drive: &ComplexMatrix,
    fixed: &ComplexMatrix,
    t0: f64,
    t1: f64,
) -> Result<ComplexMatrix> {
    let seg = &schedule.segments[segment];
    let span = t1 - t0;
    let slices = match seg.envelope {
        Envelope::Square => 1,
        Envelope::Sine => ((span * schedule.omega_m / 1e-3).ceil() as usize).max(1),
    };
    let dt = span / slices as f64;
    let mut u = ComplexMatrix::identity(schedule.dim());
    for k in 0..slices {
        let a = t0 + k as f64 * dt;
        let area = seg
            .envelope
            .area_between(a, a + dt, seg.duration, schedule.omega_m);
        let h = &drive.scale_real(area) + &fixed.scale_real(dt);
        u = &h.scale(-I).exp()? * &u;
    }
    Ok(u)
}

/// Full-schedule propagator under the systematic error model.
pub fn propagate_unitary(schedule: &Schedule, err: &ErrorModel) -> Result<ComplexMatrix> {
    propagate_unitary_with(schedule, err, None)
}

/// As [`propagate_unitary`], with an additional constant Hamiltonian.
pub fn propagate_unitary_with(
    schedule: &Schedule,
    err: &ErrorModel,
    extra: Option<&ComplexMatrix>,
) -> Result<ComplexMatrix> {
    schedule.validate()?;
    check_error_model(err)?;
    let fixed = static_hamiltonian(schedule, err, extra)?;
    let mut u = ComplexMatrix::identity(schedule.dim());
    for (k, seg) in schedule.segments.iter().enumerate() {
        let drive = unit_drive(schedule, k, err);
        u = &piece_propagator(schedule, k, &drive, &fixed, 0.0, seg.duration)? * &u;
    }
    Ok(u)
}

fn static_hamiltonian(
    schedule: &Schedule,
    err: &ErrorModel,
    extra: Option<&ComplexMatrix>,
) -> Result<ComplexMatrix> {
    let mut fixed = detuning_term(schedule, err);
    if let Some(x) = extra {
        if x.dim() != schedule.dim() {
            return Err(Error::DimensionMismatch {
                expected: schedule.dim(),
                found: x.dim(),
            });
        }
        if !x.is_hermitian(1e-12) {
            return Err(Error::NotHermitian {
                deviation: x.hermiticity_error(),
            });
        }
        fixed = &fixed + x;
    }
    Ok(fixed)
}

/// Where samples fall inside each segment: `(local end time, sample ids)`.
struct SegmentPlan {
    cuts: Vec<(f64, Vec<usize>)>,
}

fn sample_times(total: f64, samples: usize) -> Result<Vec<f64>> {
    if samples < 2 {
        return Err(Error::param("need at least two samples (start and end)"));
    }
    Ok((0..samples)
        .map(|k| total * k as f64 / (samples - 1) as f64)
        .collect())
}

fn plan(schedule: &Schedule, times: &[f64]) -> Vec<SegmentPlan> {
    let bounds = schedule.boundaries();
    let total = *bounds.last().expect("boundaries are non-empty");
    let tol = 1e-12 * total.max(1.0);
    let mut plans: Vec<SegmentPlan> = schedule
        .segments
        .iter()
        .map(|_| SegmentPlan { cuts: Vec::new() })
        .collect();
    for (k, &t) in times.iter().enumerate().skip(1) {
        let j = (0..schedule.segments.len())
            .find(|&j| t <= bounds[j + 1] + tol)
            .unwrap_or(schedule.segments.len() - 1);
        let duration = schedule.segments[j].duration;
        let mut local = (t - bounds[j]).clamp(0.0, duration);
        if duration - local <= tol {
            local = duration;
        }
        let cuts = &mut plans[j].cuts;
        match cuts.last_mut() {
            Some((last, ids)) if (*last - local).abs() <= tol => ids.push(k),
            _ => cuts.push((local, vec![k])),
        }
    }
    for (j, p) in plans.iter_mut().enumerate() {
        let duration = schedule.segments[j].duration;
        if p.cuts.last().is_none_or(|(t, _)| *t < duration) {
            p.cuts.push((duration, Vec::new()));
        }
    }
    plans
}

fn steps_for(span: f64, max_step: f64) -> usize {
    ((span / max_step).ceil() as usize).max(1)
}

struct Sparse {
    entries: Vec<(usize, usize, C64)>,
}

impl Sparse {
    fn from_dense(m: &ComplexMatrix) -> Self {
        let n = m.dim();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if v != ZERO {
                    entries.push((i, j, v));
                }
            }
        }
        Self { entries }
    }
}

/// The master-equation right-hand side for one schedule.
struct Generator {
    n: usize,
    drives: Vec<ComplexMatrix>,
    sparse_drives: Vec<Sparse>,
    /// Detuning term minus `i/2 Σ Γ L†L`.
    effective_static: ComplexMatrix,
    sparse_static: Sparse,
    jumps: Vec<(f64, Sparse)>,
}

impl Generator {
    fn new(schedule: &Schedule, err: &ErrorModel, noise: &LindbladSpec) -> Self {
        let n = schedule.dim();
        let drives: Vec<ComplexMatrix> = (0..schedule.segments.len())
            .map(|k| unit_drive(schedule, k, err))
            .collect();
        let mut anti = ComplexMatrix::zeros(n);
        let mut jumps = Vec::new();
        for c in noise.channels().iter().filter(|c| c.rate > 0.0) {
            let l = &c.operator;
            anti = &anti + &(&l.dagger() * l).scale_real(0.5 * c.rate);
            jumps.push((c.rate, Sparse::from_dense(l)));
        }
        let effective_static = &detuning_term(schedule, err) - &anti.scale(I);
        Self {
            n,
            sparse_drives: drives.iter().map(Sparse::from_dense).collect(),
            drives,
            sparse_static: Sparse::from_dense(&effective_static),
            effective_static,
            jumps,
        }
    }

    /// Liouvillian on row-major `vec(ρ)` at drive amplitude `a`.
    fn superoperator(&self, segment: usize, a: f64) -> Array2<C64> {
        let n = self.n;
        let g = &self.drives[segment].scale_real(a) + &self.effective_static;
        let mut s = Array2::<C64>::zeros((n * n, n * n));
        for i in 0..n {
            for j in 0..n {
                let r = i * n + j;
                for k in 0..n {
                    s[[r, k * n + j]] += -I * g[(i, k)];
                    s[[r, i * n + k]] += I * g[(j, k)].conj();
                }
            }
        }
        for (rate, l) in &self.jumps {
            for &(i, k, v) in &l.entries {
                for &(j, m, w) in &l.entries {
                    s[[i * n + j, k * n + m]] += v * w.conj() * *rate;
                }
            }
        }
        s
    }

    /// `dρ/dt` at amplitude `a`. Uses `ρ H_eff† = (H_eff ρ)†`, so the result
    /// is exactly Hermitian whenever `ρ` is.
    fn rhs(&self, segment: usize, a: f64, rho: &[C64], out: &mut [C64], x: &mut [C64]) {
        let n = self.n;
        x.fill(ZERO);
        let mut left = |m: &Sparse, scale: f64| {
            for &(i, j, v) in &m.entries {
                let c = v * scale;
                let src = &rho[j * n..(j + 1) * n];
                let dst = &mut x[i * n..(i + 1) * n];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += c * s;
                }
            }
        };
        left(&self.sparse_drives[segment], a);
        left(&self.sparse_static, 1.0);
        for i in 0..n {
            for k in 0..n {
                out[i * n + k] = -I * x[i * n + k] + I * x[k * n + i].conj();
            }
        }
        for (rate, l) in &self.jumps {
            for &(i, k, v) in &l.entries {
                let vr = v * *rate;
                for &(j, m, w) in &l.entries {
                    out[i * n + j] += vr * rho[k * n + m] * w.conj();
                }
            }
        }
    }
}

/// One RK4 step polynomial, `Σ_{k≤4} (hS)^k / k!`.
fn rk4_polynomial(s: &Array2<C64>, h: f64) -> Array2<C64> {
    let dim = s.nrows();
    let a = s.mapv(|v| v * h);
    let eye = Array2::<C64>::eye(dim);
    let mut t = &eye + &a.mapv(|v| v / 4.0);
    t = &eye + &a.dot(&t).mapv(|v| v / 3.0);
    t = &eye + &a.dot(&t).mapv(|v| v / 2.0);
    &eye + &a.dot(&t)
}

fn matrix_power(base: &Array2<C64>, mut exp: usize) -> Array2<C64> {
    let mut result = Array2::<C64>::eye(base.nrows());
    let mut b = base.clone();
    while exp > 0 {
        if exp & 1 == 1 {
            result = result.dot(&b);
        }
        exp >>= 1;
        if exp > 0 {
            b = b.dot(&b);
        }
    }
    result
}

fn max_deviation(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn to_density(n: usize, v: &[C64], stats: &mut IntegratorStats) -> Result<DensityMatrix> {
    let m = ComplexMatrix::from_array(
        Array2::from_shape_vec((n, n), v.to_vec()).expect("buffer has n² entries"),
    )?;
    let checks = inspect(&m)?;
    stats.record(&checks);
    Ok(DensityMatrix { matrix: m })
}

struct Run<'a> {
    schedule: &'a Schedule,
    generator: Generator,
    options: IntegratorOptions,
    plans: Vec<SegmentPlan>,
    times: Vec<f64>,
    /// `(segment, span bits)` → (coarse, fine) step operators.
    cache: HashMap<(usize, u64), (Array2<C64>, Array2<C64>)>,
}

impl<'a> Run<'a> {
    fn use_superoperator(&self) -> bool {
        self.schedule.dim() <= SUPEROPERATOR_MAX_DIM && self.schedule.is_square()
    }

    fn operators(&mut self, segment: usize, span: f64) -> &(Array2<C64>, Array2<C64>) {
        let key = (segment, span.to_bits());
        let options = self.options;
        let omega_m = self.schedule.omega_m;
        let generator = &self.generator;
        self.cache.entry(key).or_insert_with(|| {
            let s = generator.superoperator(segment, omega_m);
            let m = steps_for(span, options.max_step / omega_m);
            let h = span / m as f64;
            let coarse = matrix_power(&rk4_polynomial(&s, h), m);
            let fine = matrix_power(&rk4_polynomial(&s, h / 2.0), 2 * m);
            (coarse, fine)
        })
    }

    fn rk4_piece(&self, segment: usize, rho: &mut [C64], t0: f64, span: f64, steps: usize) {
        let seg = &self.schedule.segments[segment];
        let omega_m = self.schedule.omega_m;
        let amp = |t: f64| seg.envelope.amplitude(t, seg.duration, omega_m);
        let len = rho.len();
        let h = span / steps as f64;
        let (mut k1, mut k2, mut k3, mut k4) =
            (vec![ZERO; len], vec![ZERO; len], vec![ZERO; len], vec![ZERO; len]);
        let mut tmp = vec![ZERO; len];
        let mut x = vec![ZERO; len];
        let g = &self.generator;
        for step in 0..steps {
            let t = t0 + step as f64 * h;
            g.rhs(segment, amp(t), rho, &mut k1, &mut x);
            for i in 0..len {
                tmp[i] = rho[i] + k1[i] * (h / 2.0);
            }
            g.rhs(segment, amp(t + h / 2.0), &tmp, &mut k2, &mut x);
            for i in 0..len {
                tmp[i] = rho[i] + k2[i] * (h / 2.0);
            }
            g.rhs(segment, amp(t + h / 2.0), &tmp, &mut k3, &mut x);
            for i in 0..len {
                tmp[i] = rho[i] + k3[i] * h;
            }
            g.rhs(segment, amp(t + h), &tmp, &mut k4, &mut x);
            for i in 0..len {
                rho[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
            }
        }
    }

    fn evolve(&mut self, rho0: &DensityMatrix) -> Result<TimeSeries> {
        let n = self.schedule.dim();
        let mut stats = IntegratorStats::default();
        let mut samples: Vec<Option<DensityMatrix>> = vec![None; self.times.len()];
        let mut rho: Vec<C64> = rho0.matrix().as_array().iter().copied().collect();
        samples[0] = Some(to_density(n, &rho, &mut stats)?);
        let superop = self.use_superoperator();
        let max_step = self.options.max_step / self.schedule.omega_m;
        for segment in 0..self.plans.len() {
            let mut coarse = rho.clone();
            let mut start = 0.0;
            let cuts: Vec<(f64, Vec<usize>)> = self.plans[segment].cuts.clone();
            for (end, ids) in cuts {
                let span = end - start;
                if span > 0.0 {
                    let m = steps_for(span, max_step);
                    if superop {
                        let (c, f) = self.operators(segment, span);
                        coarse = c.dot(&Array1::from(coarse)).to_vec();
                        rho = f.dot(&Array1::from(rho)).to_vec();
                    } else {
                        self.rk4_piece(segment, &mut coarse, start, span, m);
                        self.rk4_piece(segment, &mut rho, start, span, 2 * m);
                    }
                    stats.steps += 2 * m;
                }
                for id in ids {
                    samples[id] = Some(to_density(n, &rho, &mut stats)?);
                }
                start = end;
            }
            let deviation = max_deviation(&coarse, &rho);
            stats.max_richardson_deviation = stats.max_richardson_deviation.max(deviation);
            if deviation.is_nan() || deviation > self.options.tolerance {
                return Err(Error::StepSize {
                    segment,
                    deviation,
                    tolerance: self.options.tolerance,
                });
            }
        }
        Ok(TimeSeries {
            times: self.times.clone(),
            states: samples
                .into_iter()
                .map(|s| s.expect("every sample time is covered by the plan"))
                .collect(),
            stats,
        })
    }
}

/// Integrates the master equation from `rho0`, recording `samples` evenly
/// spaced states including both endpoints.
pub fn lindblad_evolve(
    schedule: &Schedule,
    err: &ErrorModel,
    noise: &LindbladSpec,
    rho0: &DensityMatrix,
    samples: usize,
) -> Result<TimeSeries> {
    let mut out = lindblad_evolve_many(
        schedule,
        err,
        noise,
        std::slice::from_ref(rho0),
        samples,
        &IntegratorOptions::default(),
    )?;
    Ok(out.pop().expect("one input state"))
}

/// Evolves several initial states through the same schedule, sharing the
/// per-segment step operators.
pub fn lindblad_evolve_many(
    schedule: &Schedule,
    err: &ErrorModel,
    noise: &LindbladSpec,
    rho0s: &[DensityMatrix],
    samples: usize,
    options: &IntegratorOptions,
) -> Result<Vec<TimeSeries>> {
    schedule.validate()?;
    check_error_model(err)?;
    if !(options.max_step.is_finite() && options.max_step > 0.0 && options.max_step <= 1e-3) {
        return Err(Error::param("max_step must lie in (0, 1e-3]"));
    }
    if options.tolerance.is_nan() || options.tolerance <= 0.0 {
        return Err(Error::param("integrator tolerance must be positive"));
    }
    let n = schedule.dim();
    if noise.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: noise.dim(),
        });
    }
    for rho in rho0s {
        if rho.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: rho.dim(),
            });
        }
    }
    let times = sample_times(schedule.total_duration(), samples)?;
    let mut run = Run {
        schedule,
        generator: Generator::new(schedule, err, noise),
        options: *options,
        plans: plan(schedule, &times),
        times,
        cache: HashMap::new(),
    };
    rho0s.iter().map(|rho| run.evolve(rho)).collect()
}

/// Final states only, with the combined integrator statistics.
pub fn lindblad_final_states(
    schedule: &Schedule,
    err: &ErrorModel,
    noise: &LindbladSpec,
    rho0s: &[DensityMatrix],
) -> Result<(Vec<DensityMatrix>, IntegratorStats)> {
    let series = lindblad_evolve_many(schedule, err, noise, rho0s, 2, &IntegratorOptions::default())?;
    let mut stats = IntegratorStats::default();
    let mut finals = Vec::with_capacity(series.len());
    for s in series {
        stats.merge(&s.stats);
        finals.push(s.states.into_iter().last().expect("two samples"));
    }
    Ok((finals, stats))
}

/// Bloch coordinates of the state in the `{|b⟩, |a⟩}` frame:
/// `x = 2 Re(c_b* c_a)`, `y = 2 Im(c_b* c_a)`, `z = |c_b|² − |c_a|²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for p in &self.points {
            w.serialize(p)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Parse(format!("csv buffer: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?).map_err(|e| Error::io(path, e))
    }
}

/// Follows the bright state through the schedule.
pub fn trace_bright_state(
    schedule: &Schedule,
    err: &ErrorModel,
    samples: usize,
) -> Result<Trajectory> {
    schedule.validate()?;
    check_error_model(err)?;
    let (bright, aux) = schedule.bright_and_aux()?;
    let times = sample_times(schedule.total_duration(), samples)?;
    let fixed = detuning_term(schedule, err);
    let point = |t: f64, psi: &StateVector| {
        let cb = bright.inner(psi);
        let ca = aux.inner(psi);
        let coherence = cb.conj() * ca;
        TrajectoryPoint {
            t,
            x: 2.0 * coherence.re,
            y: 2.0 * coherence.im,
            z: cb.norm_sqr() - ca.norm_sqr(),
        }
    };
    let mut psi = bright.clone();
    let mut points = vec![point(0.0, &psi)];
    for (segment, p) in plan(schedule, &times).into_iter().enumerate() {
        let drive = unit_drive(schedule, segment, err);
        let mut start = 0.0;
        for (end, ids) in p.cuts {
            if end > start {
                psi = piece_propagator(schedule, segment, &drive, &fixed, start, end)?.apply(&psi);
            }
            for id in ids {
                points.push(point(times[id], &psi));
            }
            start = end;
        }
    }
    Ok(Trajectory { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GateSpec;
    use crate::pulses::{build_dcnhqc, build_nhqc};

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::from_pure(&StateVector::basis(3, 1)).is_ok());
        let mut m = ComplexMatrix::zeros(2);
        m[(0, 0)] = C64::from(1.5);
        m[(1, 1)] = C64::from(-0.5);
        assert!(matches!(
            DensityMatrix::new(m),
            Err(Error::InvalidDensityMatrix(_))
        ));
        let mut m = ComplexMatrix::identity(2).scale_real(0.5);
        m[(0, 1)] = C64::new(0.0, 0.1);
        assert!(DensityMatrix::new(m).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::identity(2)).is_err());
    }

    #[test]
    fn plan_covers_every_sample() {
        let s = build_dcnhqc(&GateSpec::s_gate());
        let times = sample_times(s.total_duration(), 37).unwrap();
        let plans = plan(&s, &times);
        let mut seen: Vec<usize> = plans
            .iter()
            .flat_map(|p| p.cuts.iter().flat_map(|(_, ids)| ids.clone()))
            .collect();
        seen.sort();
        assert_eq!(seen, (1..37).collect::<Vec<_>>());
        for (p, seg) in plans.iter().zip(&s.segments) {
            assert_eq!(p.cuts.last().unwrap().0, seg.duration);
        }
    }

    #[test]
    fn noiseless_lindblad_matches_unitary() {
        let s = build_nhqc(&GateSpec::hadamard());
        let err = ErrorModel::new(0.05, 0.02).unwrap();
        let psi = StateVector::basis(3, 0);
        let u = propagate_unitary(&s, &err).unwrap();
        let expected = u.apply(&psi).projector();
        let series = lindblad_evolve(
            &s,
            &err,
            &LindbladSpec::noiseless(3),
            &DensityMatrix::from_pure(&psi).unwrap(),
            5,
        )
        .unwrap();
        assert!(series.final_state().matrix().max_abs_diff(&expected) < 1e-10);
    }

    #[test]
    fn superoperator_and_direct_paths_agree() {
        let s = build_nhqc(&GateSpec::hadamard());
        let err = ErrorModel::new(0.03, 0.0).unwrap();
        let noise = LindbladSpec::three_level(1e-2).unwrap();
        let rho0 = DensityMatrix::from_pure(&StateVector::basis(3, 1)).unwrap();
        let mut run = Run {
            schedule: &s,
            generator: Generator::new(&s, &err, &noise),
            options: IntegratorOptions::default(),
            plans: plan(&s, &[0.0, s.total_duration()]),
            times: vec![0.0, s.total_duration()],
            cache: HashMap::new(),
        };
        let a = run.evolve(&rho0).unwrap();
        let mut v: Vec<C64> = rho0.matrix().as_array().iter().copied().collect();
        for k in 0..s.segments.len() {
            let d = s.segments[k].duration;
            run.rk4_piece(k, &mut v, 0.0, d, 2 * steps_for(d, 1e-3));
        }
        let b = ComplexMatrix::from_array(Array2::from_shape_vec((3, 3), v).unwrap()).unwrap();
        assert!(a.final_state().matrix().max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn impossible_tolerance_reports_segment() {
        let s = build_nhqc(&GateSpec::hadamard());
        let rho0 = DensityMatrix::from_pure(&StateVector::basis(3, 0)).unwrap();
        let options = IntegratorOptions {
            max_step: 1e-3,
            tolerance: 1e-30,
        };
        let noise = LindbladSpec::three_level(1e-3).unwrap();
        let r = lindblad_evolve_many(&s, &ErrorModel::NONE, &noise, &[rho0], 2, &options);
        assert!(matches!(r, Err(Error::StepSize { segment: 0, .. })));
    }

    #[test]
    fn trajectory_starts_at_pole_and_returns() {
        let s = build_nhqc(&GateSpec::hadamard());
        let tr = trace_bright_state(&s, &ErrorModel::NONE, 41).unwrap();
        let first = tr.points[0];
        let last = *tr.points.last().unwrap();
        assert!((first.z - 1.0).abs() < 1e-14);
        assert!((last.z - 1.0).abs() < 1e-10);
        let mid = tr.points[20];
        assert!((mid.z + 1.0).abs() < 1e-10, "mid z = {}", mid.z);
        assert!(tr.to_csv_string().unwrap().starts_with("t,x,y,z\n"));
    }
}
