//! CSV bundles behind each reproduced figure, plus a JSON manifest that
//! tells a renderer which file holds what.

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::dynamics::{
    lindblad_evolve, propagate_unitary, trace_bright_state, DensityMatrix, IntegratorStats,
    LindbladSpec, TimeSeries,
};
use crate::error::{Error, Result};
use crate::linalg::{kron_state, StateVector, C64, ONE, ZERO};
use crate::metrics::state_fidelity;
use crate::model::{self, ErrorModel, GateSpec, TwoQubitGateSpec};
use crate::pulses::{self, Protocol, Schedule};
use crate::scans::{run_scan, Axis, AxisName, Metric, ScanFixed, ScanGrid, ScanResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureName {
    Fig1,
    Fig3ab,
    Fig3c,
    Fig3d,
    Fig4,
    Fig6,
    Fig7,
}

impl FigureName {
    pub const ALL: [FigureName; 7] = [
        FigureName::Fig1,
        FigureName::Fig3ab,
        FigureName::Fig3c,
        FigureName::Fig3d,
        FigureName::Fig4,
        FigureName::Fig6,
        FigureName::Fig7,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FigureName::Fig1 => "fig1",
            FigureName::Fig3ab => "fig3ab",
            FigureName::Fig3c => "fig3c",
            FigureName::Fig3d => "fig3d",
            FigureName::Fig4 => "fig4",
            FigureName::Fig6 => "fig6",
            FigureName::Fig7 => "fig7",
        }
    }
}

impl FromStr for FigureName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigureName::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| {
                Error::Parse(format!(
                    "unknown figure '{s}' (expected one of fig1, fig3ab, fig3c, fig3d, fig4, fig6, fig7)"
                ))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    BlochPath,
    Line,
    Staircase,
    Heatmap,
    PopulationTraces,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    pub description: String,
}

fn col(name: &str, description: &str) -> Column {
    Column {
        name: name.to_string(),
        description: description.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub kind: PlotKind,
    pub series: String,
    pub columns: Vec<Column>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FigureManifest {
    pub figure: FigureName,
    pub reproduces: String,
    pub description: String,
    pub notes: Vec<String>,
    pub files: Vec<ManifestEntry>,
    /// Present when the bundle required a master-equation run.
    pub integrator: Option<IntegratorStats>,
    /// Largest deviation between the master equation at zero rates and the
    /// unitary evolution, for the bundle's schedules.
    pub unitary_reduction_deviation: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FigureOptions {
    pub grid_points: usize,
    pub samples: usize,
    pub jobs: Option<usize>,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            grid_points: 41,
            samples: 201,
            jobs: None,
        }
    }
}

struct Bundle<'a> {
    dir: &'a Path,
    files: Vec<ManifestEntry>,
    stats: Option<IntegratorStats>,
    reduction: Option<f64>,
}

impl<'a> Bundle<'a> {
    fn new(dir: &'a Path) -> Self {
        Self {
            dir,
            files: Vec::new(),
            stats: None,
            reduction: None,
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn add(&mut self, name: &str, kind: PlotKind, series: &str, columns: Vec<Column>) {
        self.files.push(ManifestEntry {
            path: name.to_string(),
            kind,
            series: series.to_string(),
            columns,
        });
    }

    fn merge_stats(&mut self, s: &IntegratorStats) {
        self.stats.get_or_insert_with(IntegratorStats::default).merge(s);
    }

    fn note_reduction(&mut self, d: f64) {
        self.reduction = Some(self.reduction.map_or(d, |x| x.max(d)));
    }
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| format!("{v:.16e}")))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Max-entry distance between the zero-rate master equation and `U ρ₀ U†`.
pub fn unitary_reduction_deviation(
    schedule: &Schedule,
    err: &ErrorModel,
    initial: &StateVector,
) -> Result<f64> {
    let zero = LindbladSpec::noiseless(schedule.dim());
    let series = lindblad_evolve(schedule, err, &zero, &DensityMatrix::from_pure(initial)?, 2)?;
    let expected = propagate_unitary(schedule, err)?.apply(initial).projector();
    Ok(series.final_state().matrix().max_abs_diff(&expected))
}

fn scan_columns(axes: &[AxisName]) -> Vec<Column> {
    let mut cols: Vec<Column> = axes
        .iter()
        .map(|a| match a {
            AxisName::Epsilon => col("epsilon", "amplitude error"),
            AxisName::Delta => col("delta", "detuning error in units of the peak Rabi frequency"),
            AxisName::GammaRate => col("gamma_rate", "decoherence rate in units of the peak Rabi frequency"),
        })
        .collect();
    cols.push(col("fidelity", "six-state gate fidelity"));
    cols.push(col("infidelity", "1 - fidelity"));
    cols.push(col("log10_infidelity", "log10 of the infidelity, floored at -14"));
    cols
}

fn scan_into(bundle: &mut Bundle, name: &str, kind: PlotKind, series: &str, grid: &ScanGrid, jobs: Option<usize>) -> Result<ScanResult> {
    let result = run_scan(grid, jobs)?;
    result.write_csv(&bundle.path(name))?;
    if result.stats.steps > 0 {
        bundle.merge_stats(&result.stats);
    }
    let axes: Vec<AxisName> = grid.axes.iter().map(|a| a.name).collect();
    bundle.add(name, kind, series, scan_columns(&axes));
    Ok(result)
}

fn fig1(b: &mut Bundle, opt: &FigureOptions) -> Result<()> {
    for protocol in [Protocol::Nhqc, Protocol::Dcnhqc] {
        for eps in [0.0, 0.1] {
            let s = pulses::build(protocol, &GateSpec::hadamard());
            let tr = trace_bright_state(&s, &ErrorModel::amplitude(eps), opt.samples)?;
            let name = format!("fig1_{}_eps{}.csv", protocol.name(), if eps == 0.0 { "0" } else { "0.1" });
            tr.write_csv(&b.path(&name))?;
            b.add(
                &name,
                PlotKind::BlochPath,
                &format!("{} epsilon={eps}", protocol.name()),
                vec![
                    col("t", "time in units of 1/peak Rabi frequency"),
                    col("x", "2 Re(c_b* c_a)"),
                    col("y", "2 Im(c_b* c_a)"),
                    col("z", "|c_b|^2 - |c_a|^2"),
                ],
            );
        }
    }
    Ok(())
}

fn trace_columns(labels: &[&str]) -> Vec<Column> {
    let mut cols = vec![col("t", "time in units of 1/peak Rabi frequency")];
    for l in labels {
        cols.push(col(&format!("p_{l}"), &format!("population of |{l}>")));
    }
    cols.push(col("fidelity", "overlap with the ideal final state"));
    cols
}

fn trace_rows(series: &TimeSeries, indices: &[usize], target: &StateVector) -> Result<Vec<Vec<f64>>> {
    series
        .times
        .iter()
        .zip(&series.states)
        .map(|(t, rho)| {
            let pops = rho.populations();
            let mut row = vec![*t];
            row.extend(indices.iter().map(|&i| pops[i]));
            row.push(state_fidelity(rho, target)?);
            Ok(row)
        })
        .collect()
}

fn fig3ab(b: &mut Bundle, opt: &FigureOptions) -> Result<()> {
    let h = FRAC_1_SQRT_2;
    let runs = [
        ("H", GateSpec::hadamard(), StateVector::new(vec![ONE, ZERO, ZERO])),
        ("S", GateSpec::s_gate(), StateVector::new(vec![C64::from(h), C64::from(h), ZERO])),
    ];
    let noise = LindbladSpec::three_level(5e-4)?;
    for (label, spec, psi) in runs {
        let s = pulses::build_dcnhqc(&spec);
        let target = s.register.embed(&model::ideal_gate(&spec).apply(&StateVector::new(vec![psi[0], psi[1]])))?;
        let series = lindblad_evolve(&s, &ErrorModel::NONE, &noise, &DensityMatrix::from_pure(&psi)?, opt.samples)?;
        b.merge_stats(&series.stats);
        b.note_reduction(unitary_reduction_deviation(&s, &ErrorModel::NONE, &psi)?);
        let name = format!("fig3ab_{label}.csv");
        write_rows(&b.path(&name), &["t", "p_0", "p_1", "p_a", "fidelity"], &trace_rows(&series, &[0, 1, 2], &target)?)?;
        b.add(&name, PlotKind::PopulationTraces, &format!("DCNHQC {label} gate"), trace_columns(&["0", "1", "a"]));
    }
    Ok(())
}

fn fig3c(b: &mut Bundle) -> Result<()> {
    for protocol in [Protocol::Dcnhqc, Protocol::Nhqc] {
        let s = pulses::build(protocol, &GateSpec::s_gate());
        let bounds = s.boundaries();
        let mut rows = Vec::new();
        for (k, seg) in s.segments.iter().enumerate() {
            let amp = seg.envelope.amplitude(seg.duration / 2.0, seg.duration, s.omega_m);
            rows.push(vec![k as f64, bounds[k], amp, seg.phase]);
            rows.push(vec![k as f64, bounds[k + 1], amp, seg.phase]);
        }
        let name = format!("fig3c_{}.csv", protocol.name());
        write_rows(&b.path(&name), &["segment", "t", "omega", "phase"], &rows)?;
        b.add(
            &name,
            PlotKind::Staircase,
            &format!("{} S gate", protocol.name()),
            vec![
                col("segment", "segment index"),
                col("t", "segment start or end time"),
                col("omega", "drive amplitude in units of the peak Rabi frequency"),
                col("phase", "drive phase in radians"),
            ],
        );
        let json = format!("fig3c_{}_schedule.json", protocol.name());
        std::fs::write(b.path(&json), s.to_json()?).map_err(|e| Error::io(b.path(&json), e))?;
    }
    Ok(())
}

fn error_axis(name: AxisName, points: usize) -> Result<Axis> {
    Axis::new(name, -0.1, 0.1, points)
}

fn fig3d(b: &mut Bundle, opt: &FigureOptions) -> Result<()> {
    for protocol in [Protocol::Nhqc, Protocol::Dcnhqc] {
        let grid = ScanGrid::new(
            vec![error_axis(AxisName::Epsilon, opt.grid_points)?],
            ScanFixed {
                protocol,
                gate: GateSpec::s_gate(),
                ..ScanFixed::default()
            },
            Metric::GateSixState,
        )?;
        let name = format!("fig3d_{}.csv", protocol.name());
        scan_into(b, &name, PlotKind::Line, protocol.name(), &grid, opt.jobs)?;
    }
    Ok(())
}

fn fig4(b: &mut Bundle, opt: &FigureOptions) -> Result<()> {
    for (label, gate) in [("S", GateSpec::s_gate()), ("H", GateSpec::hadamard())] {
        for protocol in [Protocol::Dcnhqc, Protocol::Nhqc] {
            let grid = ScanGrid::new(
                vec![
                    error_axis(AxisName::Epsilon, opt.grid_points)?,
                    Axis::new(AxisName::GammaRate, 0.0, 5e-4, opt.grid_points)?,
                ],
                ScanFixed {
                    protocol,
                    gate,
                    ..ScanFixed::default()
                },
                Metric::GateSixState,
            )?;
            let name = format!("fig4_{}_{label}.csv", protocol.name());
            scan_into(b, &name, PlotKind::Heatmap, &format!("{} {label} gate", protocol.name()), &grid, opt.jobs)?;
            let s = grid.schedule()?;
            let probe = s.register.embed(&model::cardinal_states()[2])?;
            b.note_reduction(unitary_reduction_deviation(&s, &ErrorModel::amplitude(0.1), &probe)?);
        }
    }
    Ok(())
}

fn fig6(b: &mut Bundle, opt: &FigureOptions) -> Result<()> {
    for encoded in [false, true] {
        let grid = ScanGrid::new(
            vec![
                error_axis(AxisName::Epsilon, opt.grid_points)?,
                error_axis(AxisName::Delta, opt.grid_points)?,
            ],
            ScanFixed {
                encoded,
                ..ScanFixed::default()
            },
            Metric::GateSixState,
        )?;
        let label = if encoded { "encoded" } else { "unencoded" };
        let name = format!("fig6_{label}.csv");
        scan_into(b, &name, PlotKind::Heatmap, &format!("DCNHQC S gate, {label}"), &grid, opt.jobs)?;
    }
    Ok(())
}

/// `(|0⟩_L + |1⟩_L)|0⟩_L / √2` and its image under the schedule's
/// two-qubit gate, both in the schedule's register.
pub fn pair_probe_states(schedule: &Schedule) -> Result<(StateVector, StateVector)> {
    let spec = schedule
        .pair_spec()
        .ok_or_else(|| Error::Unsupported("pair probe needs a two-qubit schedule".into()))?;
    let h = C64::from(FRAC_1_SQRT_2);
    let zero = StateVector::new(vec![ONE, ZERO]);
    let plus = StateVector::new(vec![h, h]);
    let initial = kron_state(&plus, &zero);
    let target = model::ideal_two_qubit_gate(spec).apply(&initial);
    Ok((schedule.register.embed(&initial)?, schedule.register.embed(&target)?))
}

fn fig7(b: &mut Bundle, opt: &FigureOptions) -> Result<()> {
    let s = pulses::build_two_qubit(&TwoQubitGateSpec::gate_c(), Protocol::Dcnhqc).encoded()?;
    let (psi, target) = pair_probe_states(&s)?;
    let noise = LindbladSpec::for_register(s.register, 2e-4)?;
    let series = lindblad_evolve(&s, &ErrorModel::NONE, &noise, &DensityMatrix::from_pure(&psi)?, opt.samples)?;
    b.merge_stats(&series.stats);
    b.note_reduction(unitary_reduction_deviation(&s, &ErrorModel::NONE, &psi)?);
    let enc = crate::dfs::LogicalEncoding::pair();
    let labels: Vec<&str> = enc.basis.iter().map(|s| s.label.as_str()).collect();
    let name = "fig7_gate_c.csv";
    let mut header = vec!["t".to_string()];
    header.extend(labels.iter().map(|l| format!("p_{l}")));
    header.push("fidelity".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(&b.path(name), &header, &trace_rows(&series, &enc.indices(), &target)?)?;
    b.add(name, PlotKind::PopulationTraces, "gate C, encoded, DCNHQC", trace_columns(&labels));
    Ok(())
}

fn describe(name: FigureName) -> (&'static str, &'static str, Vec<String>) {
    match name {
        FigureName::Fig1 => ("Fig. 1", "bright-state paths on the {|b>, |a>} Bloch sphere, H gate, NHQC and DCNHQC at epsilon 0 and 0.1", vec![]),
        FigureName::Fig3ab => ("Fig. 3a-b", "DCNHQC H gate from |0> and S gate from |+> at Gamma = 5e-4", vec![]),
        FigureName::Fig3c => ("Fig. 3c", "pulse amplitude and phase staircase of the S gate", vec![]),
        FigureName::Fig3d => (
            "Fig. 3d",
            "S-gate infidelity versus amplitude error at Gamma = 0",
            vec!["only the NHQC and DCNHQC series are produced; the CNHQC and NHQCOC comparison curves are out of scope".into()],
        ),
        FigureName::Fig4 => (
            "Fig. 4",
            "gate fidelity over amplitude error and decoherence rate",
            vec!["only the NHQC and DCNHQC series are produced; the CNHQC and NHQCOC comparison panels are out of scope".into()],
        ),
        FigureName::Fig6 => ("Fig. 6", "DCNHQC S-gate fidelity over amplitude and detuning errors, unencoded and DFS-encoded, Gamma = 0", vec![]),
        FigureName::Fig7 => (
            "Fig. 7",
            "logical populations and fidelity during gate C on six encoded qubits at Gamma = 2e-4",
            vec![
                "initial state (|0>_L + |1>_L)|0>_L / sqrt 2".into(),
                "DCNHQC schedule; per-qubit decay and collective dephasing".into(),
            ],
        ),
    }
}

/// Writes the CSV bundle and `manifest.json` for `name` into `outdir`.
pub fn generate(name: FigureName, outdir: &Path, opt: &FigureOptions) -> Result<FigureManifest> {
    std::fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
    let mut b = Bundle::new(outdir);
    match name {
        FigureName::Fig1 => fig1(&mut b, opt)?,
        FigureName::Fig3ab => fig3ab(&mut b, opt)?,
        FigureName::Fig3c => fig3c(&mut b)?,
        FigureName::Fig3d => fig3d(&mut b, opt)?,
        FigureName::Fig4 => fig4(&mut b, opt)?,
        FigureName::Fig6 => fig6(&mut b, opt)?,
        FigureName::Fig7 => fig7(&mut b, opt)?,
    }
    let (reproduces, description, notes) = describe(name);
    let manifest = FigureManifest {
        figure: name,
        reproduces: reproduces.into(),
        description: description.into(),
        notes,
        files: b.files,
        integrator: b.stats,
        unitary_reduction_deviation: b.reduction,
    };
    let path = outdir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
