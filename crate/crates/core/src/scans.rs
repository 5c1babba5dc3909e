//! Parameter sweeps over amplitude error, detuning and decoherence rate.
//!
//! Grid points are independent simulations. They may run on a thread pool,
//! but results are always gathered in grid order (first axis outermost), so
//! output does not depend on the degree of parallelism.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{lindblad_final_states, propagate_unitary, DensityMatrix, IntegratorStats, LindbladSpec};
use crate::error::{Error, Result};
use crate::linalg::{StateVector, C64, I, ONE, ZERO};
use crate::metrics::{six_state_report, state_fidelity};
use crate::model::{self, ErrorModel, GateSpec};
use crate::pulses::{self, Envelope, Protocol, Schedule};

/// `log10_infidelity` column floor.
pub const LOG10_FLOOR: f64 = -14.0;

/// Largest `|ε|`, `|δ|` a scan may visit.
pub const MAX_ERROR: f64 = 0.1;

const METRIC_COLUMNS: [&str; 3] = ["fidelity", "infidelity", "log10_infidelity"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisName {
    Epsilon,
    Delta,
    GammaRate,
}

impl AxisName {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisName::Epsilon => "epsilon",
            AxisName::Delta => "delta",
            AxisName::GammaRate => "gamma_rate",
        }
    }
}

impl fmt::Display for AxisName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AxisName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epsilon" => Ok(AxisName::Epsilon),
            "delta" => Ok(AxisName::Delta),
            "gamma_rate" => Ok(AxisName::GammaRate),
            other => Err(Error::Parse(format!(
                "unknown axis '{other}' (expected epsilon, delta or gamma_rate)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: AxisName,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(name: AxisName, min: f64, max: f64, points: usize) -> Result<Self> {
        let axis = Self {
            name,
            min,
            max,
            points,
        };
        axis.validate()?;
        Ok(axis)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::NonFinite {
                context: "axis bounds",
            });
        }
        if self.min >= self.max {
            return Err(Error::param(format!(
                "axis {}: min {} must be below max {}",
                self.name, self.min, self.max
            )));
        }
        if self.points < 2 {
            return Err(Error::param(format!(
                "axis {}: need at least two points",
                self.name
            )));
        }
        if self.points > 100_000 {
            return Err(Error::param(format!("axis {}: too many points", self.name)));
        }
        if self.name == AxisName::GammaRate && self.min < 0.0 {
            return Err(Error::param("gamma_rate must be non-negative"));
        }
        Ok(())
    }

    /// Evenly spaced values from `min` to `max` inclusive.
    pub fn values(&self) -> Vec<f64> {
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                if k + 1 == self.points {
                    self.max
                } else {
                    self.min + (self.max - self.min) * k as f64 / last
                }
            })
            .collect()
    }
}

/// Parses `name:min:max:points`, e.g. `epsilon:-0.1:0.1:41`.
impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(Error::Parse(format!(
                "axis '{s}' must look like name:min:max:points"
            )));
        }
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("axis '{s}': bad number '{t}': {e}")))
        };
        let points = parts[3]
            .trim()
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("axis '{s}': bad point count: {e}")))?;
        Axis::new(parts[0].trim().parse()?, num(parts[1])?, num(parts[2])?, points)
    }
}

/// One of the six cardinal qubit states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cardinal {
    Zero,
    One,
    Plus,
    Minus,
    PlusI,
    MinusI,
}

impl Cardinal {
    pub fn state(self) -> StateVector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let amps = match self {
            Cardinal::Zero => vec![ONE, ZERO],
            Cardinal::One => vec![ZERO, ONE],
            Cardinal::Plus => vec![C64::from(h), C64::from(h)],
            Cardinal::Minus => vec![C64::from(h), C64::from(-h)],
            Cardinal::PlusI => vec![C64::from(h), I * h],
            Cardinal::MinusI => vec![C64::from(h), -I * h],
        };
        StateVector::new(amps)
    }
}

impl FromStr for Cardinal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "0" | "zero" => Ok(Cardinal::Zero),
            "1" | "one" => Ok(Cardinal::One),
            "+" | "plus" => Ok(Cardinal::Plus),
            "-" | "minus" => Ok(Cardinal::Minus),
            "+i" | "plus_i" => Ok(Cardinal::PlusI),
            "-i" | "minus_i" => Ok(Cardinal::MinusI),
            other => Err(Error::Parse(format!("unknown initial state '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Metric {
    GateSixState,
    /// `⟨Uψ|ρ_f|Uψ⟩` for a single initial state.
    State { initial: Cardinal },
}

/// Parameters held constant across a scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanFixed {
    pub protocol: Protocol,
    pub gate: GateSpec,
    pub encoded: bool,
    pub envelope: Envelope,
    pub epsilon: f64,
    pub delta: f64,
    pub gamma_rate: f64,
}

impl Default for ScanFixed {
    fn default() -> Self {
        Self {
            protocol: Protocol::Dcnhqc,
            gate: GateSpec::s_gate(),
            encoded: false,
            envelope: Envelope::Square,
            epsilon: 0.0,
            delta: 0.0,
            gamma_rate: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub axes: Vec<Axis>,
    pub fixed: ScanFixed,
    pub metric: Metric,
}

impl ScanGrid {
    pub fn new(axes: Vec<Axis>, fixed: ScanFixed, metric: Metric) -> Result<Self> {
        let grid = Self { axes, fixed, metric };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::param("a scan needs one or two axes"));
        }
        for a in &self.axes {
            a.validate()?;
        }
        if self.axes.len() == 2 && self.axes[0].name == self.axes[1].name {
            return Err(Error::param(format!("axis {} given twice", self.axes[0].name)));
        }
        let f = &self.fixed;
        if ![f.epsilon, f.delta, f.gamma_rate].iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite {
                context: "fixed scan parameters",
            });
        }
        if f.gamma_rate < 0.0 {
            return Err(Error::param("gamma_rate must be non-negative"));
        }
        let mut error_values = vec![f.epsilon, f.delta];
        for a in self.axes.iter().filter(|a| a.name != AxisName::GammaRate) {
            error_values.extend([a.min, a.max]);
        }
        if error_values.iter().any(|v| v.abs() > MAX_ERROR + 1e-12) {
            return Err(Error::param(format!(
                "scans cover |epsilon|, |delta| <= {MAX_ERROR}"
            )));
        }
        f.gate.validate()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Axis values for every grid point, first axis outermost.
    pub fn coordinates(&self) -> Vec<Vec<f64>> {
        let values: Vec<Vec<f64>> = self.axes.iter().map(Axis::values).collect();
        let mut out = vec![Vec::new()];
        for vals in &values {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    vals.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        out
    }

    pub fn schedule(&self) -> Result<Schedule> {
        let s = pulses::build(self.fixed.protocol, &self.fixed.gate).with_envelope(self.fixed.envelope);
        if self.fixed.encoded {
            s.encoded()
        } else {
            Ok(s)
        }
    }

    /// `(ε, δ, Γ)` at a grid point.
    fn parameters(&self, coords: &[f64]) -> (f64, f64, f64) {
        let (mut eps, mut delta, mut gamma) =
            (self.fixed.epsilon, self.fixed.delta, self.fixed.gamma_rate);
        for (axis, &v) in self.axes.iter().zip(coords) {
            match axis.name {
                AxisName::Epsilon => eps = v,
                AxisName::Delta => delta = v,
                AxisName::GammaRate => gamma = v,
            }
        }
        (eps, delta, gamma)
    }
}

/// Fidelity of `schedule` for one initial qubit state.
pub fn state_metric(
    schedule: &Schedule,
    err: &ErrorModel,
    noise: &LindbladSpec,
    initial: &StateVector,
) -> Result<(f64, Option<IntegratorStats>)> {
    let spec = schedule
        .gate_spec()
        .ok_or_else(|| Error::Unsupported("state metric needs a single-qubit schedule".into()))?;
    let psi = schedule.register.embed(initial)?;
    let target = schedule
        .register
        .embed(&model::ideal_gate(spec).apply(initial))?;
    if noise.is_noiseless() {
        let u = propagate_unitary(schedule, err)?;
        let f = target.inner(&u.apply(&psi)).norm_sqr();
        return Ok((f.clamp(0.0, 1.0), None));
    }
    let (finals, stats) =
        lindblad_final_states(schedule, err, noise, &[DensityMatrix::from_pure(&psi)?])?;
    Ok((state_fidelity(&finals[0], &target)?, Some(stats)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub coords: Vec<f64>,
    pub fidelity: f64,
    pub infidelity: f64,
    pub log10_infidelity: f64,
}

impl ScanRow {
    pub fn new(coords: Vec<f64>, fidelity: f64) -> Self {
        let infidelity = 1.0 - fidelity;
        let log10_infidelity = if infidelity > 0.0 {
            infidelity.log10().max(LOG10_FLOOR)
        } else {
            LOG10_FLOOR
        };
        Self {
            coords,
            fidelity,
            infidelity,
            log10_infidelity,
        }
    }
}

/// Axis names plus data rows, as stored in a scan CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanTable {
    pub axes: Vec<AxisName>,
    pub rows: Vec<ScanRow>,
}

impl ScanTable {
    pub fn header(&self) -> Vec<String> {
        self.axes
            .iter()
            .map(|a| a.as_str().to_string())
            .chain(METRIC_COLUMNS.iter().map(|s| s.to_string()))
            .collect()
    }

    pub fn write_csv_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for row in &self.rows {
            let metrics = [row.fidelity, row.infidelity, row.log10_infidelity];
            let fields = row
                .coords
                .iter()
                .chain(metrics.iter())
                .map(|v| format!("{v:.16e}"));
            w.write_record(fields)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(std::io::BufWriter::new(file))
    }

    /// Parses and validates a scan CSV.
    pub fn read_csv_from<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.len() < 4 || header.len() > 5 {
            return Err(Error::Parse(format!(
                "expected one or two axis columns plus {METRIC_COLUMNS:?}, got {header:?}"
            )));
        }
        let n_axes = header.len() - 3;
        if header[n_axes..] != METRIC_COLUMNS {
            return Err(Error::Parse(format!(
                "last columns must be {METRIC_COLUMNS:?}, got {:?}",
                &header[n_axes..]
            )));
        }
        let axes = header[..n_axes]
            .iter()
            .map(|h| h.parse::<AxisName>())
            .collect::<Result<Vec<_>>>()?;
        if n_axes == 2 && axes[0] == axes[1] {
            return Err(Error::Parse("duplicate axis column".into()));
        }
        let mut rows = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record?;
            if record.len() != header.len() {
                return Err(Error::Parse(format!(
                    "row {}: expected {} fields, found {}",
                    line + 1,
                    header.len(),
                    record.len()
                )));
            }
            let values = record
                .iter()
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::Parse(format!("row {}: bad number '{f}'", line + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            let (fidelity, infidelity, log10) =
                (values[n_axes], values[n_axes + 1], values[n_axes + 2]);
            if !(0.0..=1.0).contains(&fidelity) {
                return Err(Error::Parse(format!(
                    "row {}: fidelity {fidelity} outside [0, 1]",
                    line + 1
                )));
            }
            let expected = ScanRow::new(values[..n_axes].to_vec(), fidelity);
            if (expected.infidelity - infidelity).abs() > 1e-12
                || (expected.log10_infidelity - log10).abs() > 1e-9
            {
                return Err(Error::Parse(format!(
                    "row {}: infidelity columns inconsistent with fidelity",
                    line + 1
                )));
            }
            rows.push(ScanRow {
                coords: values[..n_axes].to_vec(),
                fidelity,
                infidelity,
                log10_infidelity: log10,
            });
        }
        if rows.is_empty() {
            return Err(Error::Parse("scan CSV has no data rows".into()));
        }
        Ok(Self { axes, rows })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv_from(std::io::BufReader::new(file))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanSummary {
    pub points: usize,
    pub min_fidelity: f64,
    pub max_fidelity: f64,
    pub argmin: Vec<f64>,
    /// Fraction of points with fidelity above 0.999.
    pub fraction_above_0_999: f64,
    /// Fraction of points with infidelity below 1e-4.
    pub fraction_below_1e_4_infidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanResult {
    pub grid: ScanGrid,
    pub rows: Vec<ScanRow>,
    #[serde(skip)]
    pub stats: IntegratorStats,
}

impl ScanResult {
    pub fn table(&self) -> ScanTable {
        ScanTable {
            axes: self.grid.axes.iter().map(|a| a.name).collect(),
            rows: self.rows.clone(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.table().write_csv(path)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn summary(&self) -> ScanSummary {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut argmin = Vec::new();
        for r in &self.rows {
            if r.fidelity < min {
                min = r.fidelity;
                argmin = r.coords.clone();
            }
            max = max.max(r.fidelity);
        }
        let n = self.rows.len() as f64;
        let frac = |pred: &dyn Fn(&ScanRow) -> bool| {
            self.rows.iter().filter(|r| pred(r)).count() as f64 / n
        };
        ScanSummary {
            points: self.rows.len(),
            min_fidelity: min,
            max_fidelity: max,
            argmin,
            fraction_above_0_999: frac(&|r| r.fidelity > 0.999),
            fraction_below_1e_4_infidelity: frac(&|r| r.infidelity < 1e-4),
        }
    }
}

fn evaluate(
    grid: &ScanGrid,
    schedule: &Schedule,
    coords: &[f64],
) -> Result<(f64, Option<IntegratorStats>)> {
    let (eps, delta, gamma) = grid.parameters(coords);
    let err = ErrorModel::new(eps, delta)?;
    let noise = LindbladSpec::for_register(schedule.register, gamma)?;
    match grid.metric {
        Metric::GateSixState => six_state_report(schedule, &err, &noise),
        Metric::State { initial } => state_metric(schedule, &err, &noise, &initial.state()),
    }
}

/// Evaluates every grid point. `jobs` bounds the worker count; `None` uses
/// the available parallelism.
pub fn run_scan(grid: &ScanGrid, jobs: Option<usize>) -> Result<ScanResult> {
    grid.validate()?;
    if jobs == Some(0) {
        return Err(Error::param("jobs must be at least 1"));
    }
    let schedule = grid.schedule()?;
    let coords = grid.coordinates();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<(f64, Option<IntegratorStats>)>> = pool.install(|| {
        coords
            .par_iter()
            .map(|c| evaluate(grid, &schedule, c))
            .collect()
    });
    let mut rows = Vec::with_capacity(coords.len());
    let mut stats = IntegratorStats::default();
    for (c, outcome) in coords.into_iter().zip(outcomes) {
        match outcome {
            Ok((f, s)) => {
                if let Some(s) = s {
                    stats.merge(&s);
                }
                rows.push(ScanRow::new(c, f));
            }
            Err(e) => {
                return Err(Error::ScanPoint {
                    coords: grid
                        .axes
                        .iter()
                        .map(|a| a.name.as_str().to_string())
                        .zip(c)
                        .collect(),
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(ScanResult {
        grid: grid.clone(),
        rows,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_parsing() {
        let a: Axis = "epsilon:-0.1:0.1:41".parse().unwrap();
        assert_eq!(a.name, AxisName::Epsilon);
        assert_eq!(a.values().len(), 41);
        assert_eq!(a.values()[40], 0.1);
        assert_eq!(a.values()[20], 0.0);
        for bad in [
            "epsilon:0.1:-0.1:3",
            "epsilon:0:1:1",
            "theta:0:1:3",
            "epsilon:0:1",
            "epsilon:a:1:3",
            "gamma_rate:-1:1:3",
            "epsilon:0:inf:3",
        ] {
            assert!(bad.parse::<Axis>().is_err(), "{bad}");
        }
    }

    #[test]
    fn coordinates_are_outer_major() {
        let grid = ScanGrid::new(
            vec![
                Axis::new(AxisName::Epsilon, 0.0, 0.1, 2).unwrap(),
                Axis::new(AxisName::Delta, 0.0, 0.1, 3).unwrap(),
            ],
            ScanFixed::default(),
            Metric::GateSixState,
        )
        .unwrap();
        assert_eq!(
            grid.coordinates(),
            vec![
                vec![0.0, 0.0],
                vec![0.0, 0.05],
                vec![0.0, 0.1],
                vec![0.1, 0.0],
                vec![0.1, 0.05],
                vec![0.1, 0.1]
            ]
        );
    }

    #[test]
    fn duplicate_axes_rejected() {
        let a = Axis::new(AxisName::Delta, 0.0, 0.1, 2).unwrap();
        assert!(ScanGrid::new(vec![a, a], ScanFixed::default(), Metric::GateSixState).is_err());
        let wide = Axis::new(AxisName::Epsilon, -0.2, 0.2, 5).unwrap();
        assert!(ScanGrid::new(vec![wide], ScanFixed::default(), Metric::GateSixState).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let table = ScanTable {
            axes: vec![AxisName::Epsilon, AxisName::GammaRate],
            rows: vec![
                ScanRow::new(vec![-0.1, 0.0], 0.987_654_321_123_456_7),
                ScanRow::new(vec![0.1, 5e-4], 1.0),
            ],
        };
        let mut buf = Vec::new();
        table.write_csv_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("epsilon,gamma_rate,fidelity,infidelity,log10_infidelity\n"));
        assert_eq!(text.lines().count(), 3);
        assert_eq!(ScanTable::read_csv_from(&buf[..]).unwrap(), table);
    }

    #[test]
    fn csv_reader_rejects_malformed_input() {
        for bad in [
            "",
            "epsilon,fidelity\n0,1\n",
            "epsilon,fidelity,infidelity,log10_infidelity\n",
            "epsilon,fidelity,infidelity,log10_infidelity\n0,2,-1,-14\n",
            "epsilon,fidelity,infidelity,log10_infidelity\n0,0.5,0.1,-1\n",
            "epsilon,fidelity,infidelity,log10_infidelity\n0,0.5,0.5\n",
            "foo,fidelity,infidelity,log10_infidelity\n0,1,0,-14\n",
        ] {
            assert!(ScanTable::read_csv_from(bad.as_bytes()).is_err(), "{bad:?}");
        }
    }
}
