//! The `dnm` command-line front end.
//!
//! ```text
//! dnm <analyze|classify|simulate|sweep> --config <path> [--out <path>]
//!     [--larmor] [--dt <x>] [--samples <n>]
//! ```
//!
//! Exit codes: 0 success, 2 configuration error, 3 preset-domain error,
//! 4 integration diverged.

pub mod config;
pub mod table;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::dynamics::{self, ModeIntegrationOptions, Trajectory};
use crate::error::Error;
use crate::modes::{self, AnalyticCase, Stability};
use crate::presets::PresetConfig;
use config::{OutputFormat, RunConfig, SweepReport};
use table::{Cell, Table};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;

/// Environment variable capping sweep parallelism.
pub const THREADS_ENV: &str = "DNM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "dnm", version, about = "Dynamical normal modes of time-dependent two-degree-of-freedom quadratic Hamiltonians")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mode angle, its rate and the mode frequencies over the window.
    Analyze(CommonArgs),
    /// Decide whether the modes stay decoupled; JSON on stdout.
    Classify(CommonArgs),
    /// Integrate in both frames and report how well they agree.
    Simulate(CommonArgs),
    /// Repeat analyze or classify over a parameter grid.
    Sweep(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output file, or output prefix for `simulate`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Cancel the rotation coupling with a Larmor term (`simulate`).
    #[arg(long)]
    pub larmor: bool,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Core(e) => match e {
                Error::InvalidParameter(_) | Error::FrameMismatch { .. } => EXIT_CONFIG,
                Error::OutOfDomain { .. }
                | Error::PresetDomain { .. }
                | Error::Singular { .. }
                | Error::ZeroFrequency { .. } => EXIT_DOMAIN,
                Error::Divergence { .. } => EXIT_DIVERGENCE,
            },
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let (cmd, args): (fn(&RunConfig, &CommonArgs) -> Result<(), CliError>, &CommonArgs) = match &cli.command {
        Command::Analyze(a) => (cmd_analyze, a),
        Command::Classify(a) => (cmd_classify, a),
        Command::Simulate(a) => (cmd_simulate, a),
        Command::Sweep(a) => (cmd_sweep, a),
    };
    let cfg = load_config(args)?;
    cmd(&cfg, args)
}

pub fn load_config(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = RunConfig::from_json(&text)?;
    if let Some(n) = args.samples {
        cfg.samples = n;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn output_target(cfg: &RunConfig, args: &CommonArgs) -> Option<PathBuf> {
    args.out.clone().or_else(|| cfg.output_path())
}

fn write_table(table: &Table, format: OutputFormat, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let file = fs::File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            let mut w = io::BufWriter::new(file);
            table.write(format, &mut w)?;
            w.flush().map_err(|e| CliError::Io(e.to_string()))
        }
        None => table.write(format, io::stdout().lock()),
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub const ANALYZE_COLUMNS: [&str; 9] = [
    "t",
    "theta",
    "theta_dot",
    "omega1_sq",
    "omega2_sq",
    "ellipse_r1",
    "ellipse_r2",
    "q1_eq",
    "q2_eq",
];

/// Rows of the analyze table for one configuration.
pub fn analyze_rows(cfg: &RunConfig) -> Result<Vec<Vec<Cell>>, CliError> {
    let sys = cfg.preset.build()?;
    let times = modes::uniform_times(cfg.window, cfg.samples);
    let decs = modes::decompose_series(&sys, &times)?;
    Ok(decs
        .iter()
        .map(|d| {
            let e = modes::ellipse_at(d);
            vec![
                d.t.into(),
                d.theta.into(),
                d.theta_dot.into(),
                d.omega1_sq.into(),
                d.omega2_sq.into(),
                e.radii[0].into(),
                e.radii[1].into(),
                d.equilibrium[0].into(),
                d.equilibrium[1].into(),
            ]
        })
        .collect())
}

fn cmd_analyze(cfg: &RunConfig, args: &CommonArgs) -> Result<(), CliError> {
    let mut table = Table::new(ANALYZE_COLUMNS);
    for row in analyze_rows(cfg)? {
        table.push(row);
    }
    write_table(&table, cfg.format(), output_target(cfg, args).as_deref())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassifyReport {
    pub separable: bool,
    pub max_abs_theta_dot: f64,
    pub stability: Stability,
    pub analytic_case: Option<AnalyticCase>,
}

pub fn classify(cfg: &RunConfig) -> Result<ClassifyReport, CliError> {
    let sys = cfg.preset.build()?;
    let r = modes::classify_separability(&sys, cfg.window, cfg.samples, cfg.tolerances.tol_sep)?;
    Ok(ClassifyReport {
        separable: r.separable,
        max_abs_theta_dot: r.max_abs_theta_dot,
        stability: r.stability,
        analytic_case: r.analytic_case,
    })
}

fn cmd_classify(cfg: &RunConfig, args: &CommonArgs) -> Result<(), CliError> {
    let report = classify(cfg)?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    println!("{text}");
    if let Some(path) = output_target(cfg, args) {
        write_json(&report, &path)?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulationReport {
    pub preset: &'static str,
    pub fingerprint: String,
    pub integrator: String,
    pub dt: f64,
    pub steps: usize,
    pub apply_larmor: bool,
    pub max_deviation: f64,
    pub lab_energy_drift: f64,
    pub final_lab: [f64; 4],
    pub final_mode: [f64; 4],
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_trajectory(traj: &Trajectory, format: OutputFormat, path: &Path) -> Result<(), CliError> {
    write_table(&Table::from_trajectory(traj), format, Some(path))
}

fn cmd_simulate(cfg: &RunConfig, args: &CommonArgs) -> Result<(), CliError> {
    let prefix = output_target(cfg, args)
        .ok_or_else(|| CliError::Config("simulate needs --out or output.path as a file prefix".into()))?;
    let spec = cfg.integrator_spec(args.dt)?;
    let (steps, dt) = spec.grid()?;
    let sys = cfg.preset.build()?;
    let x0 = cfg.initial_state.resolve(&sys, cfg.window.0)?;
    let apply_larmor = args.larmor || matches!(&cfg.preset, PresetConfig::Rotation(r) if r.larmor_compensation);
    let opts = ModeIntegrationOptions {
        apply_larmor,
        ..Default::default()
    };
    let format = cfg.format();
    let ext = format.extension();
    let fingerprint = cfg.preset.fingerprint();
    let check = match dynamics::frame_equivalence_check_with(&sys, &x0, &spec, opts) {
        Ok(check) => check,
        Err(Error::Divergence { t, partial }) => {
            let path = with_suffix(&prefix, &format!("_{}.{ext}.partial", partial.frame));
            write_trajectory(&partial, format, &path)?;
            return Err(Error::Divergence { t, partial }.into());
        }
        Err(e) => return Err(e.into()),
    };
    write_trajectory(&check.lab, format, &with_suffix(&prefix, &format!("_lab.{ext}")))?;
    write_trajectory(&check.mode, format, &with_suffix(&prefix, &format!("_mode.{ext}")))?;
    let lab_energy_drift = if apply_larmor {
        f64::NAN
    } else {
        dynamics::energy_audit(&check.lab, &sys)?.max_relative_drift
    };
    let report = SimulationReport {
        preset: cfg.preset.name(),
        fingerprint,
        integrator: spec.method.name().into(),
        dt,
        steps,
        apply_larmor,
        max_deviation: check.max_deviation,
        lab_energy_drift,
        final_lab: check.lab.last().map(|x| x.state()).unwrap_or_default(),
        final_mode: check.mode.last().map(|x| x.state()).unwrap_or_default(),
    };
    write_json(&report, &with_suffix(&prefix, "_report.json"))
}

/// Applies the sweep axes' values to a copy of the config.
fn sweep_point(base: &Value, pointers: &[String], values: &[f64]) -> Result<RunConfig, CliError> {
    let mut v = base.clone();
    for (ptr, x) in pointers.iter().zip(values) {
        let slot = v
            .pointer_mut(ptr)
            .ok_or_else(|| CliError::Config(format!("sweep pointer {ptr} does not name a config field")))?;
        *slot = serde_json::Number::from_f64(*x)
            .map(Value::Number)
            .ok_or_else(|| CliError::Config(format!("sweep value {x} is not finite")))?;
    }
    if let Some(obj) = v.as_object_mut() {
        obj.remove("sweep");
    }
    let cfg: RunConfig = serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(s) = std::env::var(THREADS_ENV) {
        let n: usize = s
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {s:?}")))?;
        builder = builder.num_threads(n.max(1));
    }
    builder.build().map_err(|e| CliError::Config(e.to_string()))
}

/// Runs the sweep described in `cfg.sweep` and returns its table.
pub fn sweep_table(cfg: &RunConfig) -> Result<Table, CliError> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep needs a `sweep` section".into()))?;
    let axes: Vec<Vec<f64>> = sweep.axes.iter().map(|a| a.points()).collect::<Result<_, _>>()?;
    let pointers: Vec<String> = sweep.axes.iter().map(|a| a.pointer.clone()).collect();
    let mut grid: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in &axes {
        grid = grid
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |x| {
                    let mut p = prefix.clone();
                    p.push(*x);
                    p
                })
            })
            .collect();
    }
    let base = serde_json::to_value(cfg).map_err(|e| CliError::Config(e.to_string()))?;

    let mut columns: Vec<String> = vec!["point".into()];
    columns.extend(sweep.axes.iter().map(|a| a.label()));
    match sweep.report {
        SweepReport::Classify => columns.extend(
            ["separable", "max_abs_theta_dot", "stability", "analytic_case"].map(String::from),
        ),
        SweepReport::Analyze => columns.extend(ANALYZE_COLUMNS.map(String::from)),
    }

    let report = sweep.report;
    let compute = |(i, values): (usize, &Vec<f64>)| -> Result<Vec<Vec<Cell>>, CliError> {
        let point = sweep_point(&base, &pointers, values)?;
        let prefix: Vec<Cell> = std::iter::once(Cell::Int(i))
            .chain(values.iter().map(|x| Cell::Float(*x)))
            .collect();
        let body = match report {
            SweepReport::Classify => {
                let r = classify(&point)?;
                vec![vec![
                    Cell::Bool(r.separable),
                    Cell::Float(r.max_abs_theta_dot),
                    Cell::Text(serde_json::to_value(r.stability).unwrap().as_str().unwrap_or_default().to_string()),
                    r.analytic_case.map_or(Cell::Missing, |c| Cell::Text(c.to_string())),
                ]]
            }
            SweepReport::Analyze => analyze_rows(&point)?,
        };
        Ok(body
            .into_iter()
            .map(|row| prefix.iter().cloned().chain(row).collect())
            .collect())
    };
    let results: Vec<Result<Vec<Vec<Cell>>, CliError>> =
        thread_pool()?.install(|| grid.par_iter().enumerate().map(compute).collect());

    let mut table = Table::new(columns);
    for rows in results {
        for row in rows? {
            table.push(row);
        }
    }
    Ok(table)
}

fn cmd_sweep(cfg: &RunConfig, args: &CommonArgs) -> Result<(), CliError> {
    let table = sweep_table(cfg)?;
    write_table(&table, cfg.format(), output_target(cfg, args).as_deref())
}
