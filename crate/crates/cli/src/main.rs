//! `holonomic gate | scan | figure`
//!
//! Exit status: 0 on success, 1 when the simulation rejects the request or
//! fails, 2 for malformed command lines and config files.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use holonomic::config::{default_initial, ResolvedRun, RunConfig, RunTarget};
use holonomic::dfs::DephasingModel;
use holonomic::dynamics::{lindblad_final_states, propagate_unitary, trace_bright_state, DensityMatrix};
use holonomic::figures::{self, pair_probe_states, FigureName, FigureOptions};
use holonomic::metrics::{six_state_report, state_fidelity, FidelityKind, FidelityReport};
use holonomic::model::ideal_gate;
use holonomic::scans::{run_scan, Axis};
use holonomic::{Envelope, Protocol, Register, Schedule, StateVector};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "holonomic", version, about = "Holonomic gate simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one gate and print its fidelities as JSON.
    Gate {
        #[command(flatten)]
        run: RunArgs,
        /// Write the bright-state Bloch trajectory to this CSV file.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Evaluate a fidelity over a parameter grid.
    Scan {
        #[command(flatten)]
        run: RunArgs,
        /// `name:min:max:points` with name epsilon, delta or gamma_rate.
        /// Repeat for a second axis; the first one varies slowest.
        #[arg(long)]
        axis: Vec<String>,
        /// `gate_six_state` (default) or `state`.
        #[arg(long)]
        metric: Option<String>,
        /// Also write the rows and grid as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write the CSV bundle and manifest for a figure.
    Figure {
        /// fig1, fig3ab, fig3c, fig3d, fig4, fig6 or fig7.
        name: String,
        outdir: PathBuf,
        /// Points per scan axis.
        #[arg(long, default_value_t = 41)]
        grid_points: usize,
        /// Time samples per trajectory or trace.
        #[arg(long, default_value_t = 201)]
        samples: usize,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Args, Debug, Default)]
#[command(next_help_heading = "Run options")]
struct RunArgs {
    /// JSON file with the same keys as these flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_protocol)]
    protocol: Option<Protocol>,
    /// Named gate, H or S.
    #[arg(long)]
    gate: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    phi: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma_g: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    phi0: Option<f64>,
    /// Simulate the two-qubit gate U2(eta, varphi).
    #[arg(long)]
    two_qubit: bool,
    #[arg(long, allow_negative_numbers = true)]
    eta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    varphi: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    varphi3: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    varphi4: Option<f64>,
    /// Fractional amplitude error.
    #[arg(long, allow_negative_numbers = true)]
    epsilon: Option<f64>,
    /// Detuning in units of the peak Rabi frequency.
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    /// Decoherence rate applied to every collapse channel.
    #[arg(long, allow_negative_numbers = true)]
    gamma_rate: Option<f64>,
    /// collective or per-qubit (encoded registers only).
    #[arg(long, value_parser = parse_dephasing)]
    dephasing: Option<DephasingModel>,
    /// Run on the DFS-encoded physical qubits.
    #[arg(long)]
    encoded: bool,
    /// square or sine.
    #[arg(long, value_parser = parse_envelope)]
    envelope: Option<Envelope>,
    #[arg(long)]
    samples: Option<usize>,
    /// Initial state for the state fidelity: 0, 1, +, -, +i, -i.
    #[arg(long, allow_hyphen_values = true)]
    initial: Option<String>,
    /// Output file (scan CSV).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

fn parse_protocol(s: &str) -> Result<Protocol, String> {
    s.parse().map_err(|e: holonomic::Error| e.to_string())
}

fn parse_dephasing(s: &str) -> Result<DephasingModel, String> {
    serde_json::from_value(json!(s)).map_err(|_| format!("unknown dephasing model '{s}'"))
}

fn parse_envelope(s: &str) -> Result<Envelope, String> {
    serde_json::from_value(json!(s)).map_err(|_| format!("unknown envelope '{s}'"))
}

enum Failure {
    Usage(String),
    Domain(holonomic::Error),
    Output(std::io::Error),
}

impl From<holonomic::Error> for Failure {
    fn from(e: holonomic::Error) -> Self {
        Failure::Domain(e)
    }
}

type Outcome<T> = Result<T, Failure>;

impl RunArgs {
    fn into_config(self) -> Outcome<RunConfig> {
        let flags = RunConfig {
            protocol: self.protocol,
            gate: self.gate,
            theta: self.theta,
            phi: self.phi,
            gamma_g: self.gamma_g,
            phi0: self.phi0,
            two_qubit: self.two_qubit.then_some(true),
            eta: self.eta,
            varphi: self.varphi,
            varphi3: self.varphi3,
            varphi4: self.varphi4,
            epsilon: self.epsilon,
            delta: self.delta,
            gamma_rate: self.gamma_rate,
            dephasing: self.dephasing,
            encoded: self.encoded.then_some(true),
            envelope: self.envelope,
            samples: self.samples,
            initial: self.initial,
            output: self.output,
            jobs: self.jobs,
            ..RunConfig::default()
        };
        match self.config {
            Some(path) => {
                let file = RunConfig::load(&path)
                    .map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))?;
                Ok(flags.over(file))
            }
            None => Ok(flags),
        }
    }
}

fn print_json(value: &impl serde::Serialize) -> Outcome<()> {
    let text = serde_json::to_string_pretty(value).map_err(holonomic::Error::from)?;
    writeln!(std::io::stdout().lock(), "{text}").map_err(Failure::Output)
}

fn noise_label(run: &ResolvedRun, register: Register) -> &'static str {
    match register {
        Register::EncodedQubit | Register::EncodedPair => match run.dephasing {
            DephasingModel::Collective => "per-qubit decay, collective dephasing",
            DephasingModel::PerQubit => "per-qubit decay and dephasing",
        },
        _ => "three-level decay and dephasing",
    }
}

fn annotate(report: FidelityReport, run: &ResolvedRun, schedule: &Schedule) -> FidelityReport {
    report
        .with("protocol", run.protocol.name())
        .with("register", format!("{:?}", schedule.register))
        .with("epsilon", run.error.epsilon)
        .with("delta", run.error.delta)
        .with("gamma_rate", run.gamma_rate)
        .with("noise", noise_label(run, schedule.register))
        .with("duration", schedule.total_duration())
}

fn single_state_report(
    run: &ResolvedRun,
    schedule: &Schedule,
    initial: &StateVector,
    target: &StateVector,
) -> Outcome<FidelityReport> {
    let noise = run.noise(schedule.register)?;
    let rho0 = DensityMatrix::from_pure(initial)?;
    let (finals, stats) = lindblad_final_states(schedule, &run.error, &noise, &[rho0])?;
    let f = state_fidelity(&finals[0], target)?;
    let mut report = FidelityReport::new(FidelityKind::State, f);
    if !noise.is_noiseless() {
        report.integrator = Some(stats);
    }
    Ok(report)
}

fn cmd_gate(run_args: RunArgs, trajectory: Option<PathBuf>) -> Outcome<()> {
    let cfg = run_args.into_config()?;
    let trajectory = trajectory.or(cfg.trajectory.clone());
    let run = cfg.resolve()?;
    let schedule = run.schedule()?;
    let mut reports = Vec::new();
    match run.target {
        RunTarget::Single(spec) => {
            let cardinal = run.initial.unwrap_or_else(|| default_initial(&spec));
            let psi = cardinal.state();
            let target = ideal_gate(&spec).apply(&psi);
            let register = schedule.register;
            let state =
                single_state_report(&run, &schedule, &register.embed(&psi)?, &register.embed(&target)?)?;
            reports.push(annotate(state, &run, &schedule).with("initial", format!("{cardinal:?}")));

            let noise = run.noise(schedule.register)?;
            let (f, stats) = six_state_report(&schedule, &run.error, &noise)?;
            let mut six = FidelityReport::new(FidelityKind::GateSixState, f);
            six.integrator = stats;
            reports.push(annotate(six, &run, &schedule));

            if let Some(path) = trajectory {
                trace_bright_state(&schedule, &run.error, run.samples)?.write_csv(&path)?;
            }
        }
        RunTarget::Pair(spec) => {
            if trajectory.is_some() {
                return Err(holonomic::Error::Unsupported(
                    "trajectories cover single-qubit gates".into(),
                )
                .into());
            }
            let (psi, target) = pair_probe_states(&schedule)?;
            let out = propagate_unitary(&schedule, &run.error)?.apply(&psi);
            let kept: f64 = schedule
                .register
                .logical_indices()
                .iter()
                .map(|&i| out[i].norm_sqr())
                .sum();
            let report = single_state_report(&run, &schedule, &psi, &target)?;
            reports.push(
                annotate(report, &run, &schedule)
                    .with("eta", spec.eta)
                    .with("varphi", spec.varphi)
                    .with("initial", "(|0>_L + |1>_L)|0>_L / sqrt 2")
                    .with("closed_system_leakage", (1.0 - kept).max(0.0)),
            );
        }
    }
    print_json(&reports)
}

fn cmd_scan(
    run_args: RunArgs,
    axis: Vec<String>,
    metric: Option<String>,
    json_out: Option<PathBuf>,
) -> Outcome<()> {
    let flags_axis = (!axis.is_empty()).then_some(axis);
    let mut cfg = run_args.into_config()?;
    cfg.axis = flags_axis.or(cfg.axis);
    cfg.metric = metric.or(cfg.metric);
    let axes = cfg.axis.as_deref().unwrap_or_default();
    if axes.is_empty() {
        return Err(Failure::Usage("scan needs at least one --axis".into()));
    }
    for a in axes {
        a.parse::<Axis>().map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let grid = cfg.scan_grid()?;
    let result = run_scan(&grid, cfg.jobs)?;
    if let Some(path) = &json_out {
        result.write_json(path)?;
    }
    match &cfg.output {
        Some(path) => {
            result.write_csv(path)?;
            print_json(&result.summary())
        }
        None => {
            result
                .table()
                .write_csv_to(std::io::stdout().lock())?;
            let summary = serde_json::to_string(&result.summary()).map_err(holonomic::Error::from)?;
            eprintln!("{summary}");
            Ok(())
        }
    }
}

fn cmd_figure(
    name: &str,
    outdir: &Path,
    grid_points: usize,
    samples: usize,
    jobs: Option<usize>,
) -> Outcome<()> {
    let name: FigureName = name
        .parse()
        .map_err(|e: holonomic::Error| Failure::Usage(e.to_string()))?;
    if jobs == Some(0) {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let opt = FigureOptions {
        grid_points,
        samples,
        jobs,
    };
    let manifest = figures::generate(name, outdir, &opt)?;
    let files: Vec<_> = manifest.files.iter().map(|f| outdir.join(&f.path)).collect();
    print_json(&json!({
        "figure": name.as_str(),
        "manifest": outdir.join("manifest.json"),
        "files": files,
    }))
}

fn dispatch(cli: Cli) -> Outcome<()> {
    match cli.command {
        Command::Gate { run, trajectory } => cmd_gate(run, trajectory),
        Command::Scan {
            run,
            axis,
            metric,
            json,
        } => cmd_scan(run, axis, metric, json),
        Command::Figure {
            name,
            outdir,
            grid_points,
            samples,
            jobs,
        } => cmd_figure(&name, &outdir, grid_points, samples, jobs),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Output(e)) => {
            eprintln!("error: writing output: {e}");
            ExitCode::from(1)
        }
    }
}
