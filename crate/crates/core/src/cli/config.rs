use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::dynamics::{IntegratorSpec, Method};
use crate::linalg::Vec2;
use crate::modes::DEFAULT_TOL_SEP;
use crate::presets::{PresetConfig, DEFAULT_TOL_COND};
use crate::quadratic::{PhasePoint, QuadraticSystem};

pub const SCHEMA_VERSION: u32 = 1;
pub const MAX_SWEEP_AXES: usize = 2;

fn default_samples() -> usize {
    200
}

/// Top-level run configuration, read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub preset: PresetConfig,
    pub window: (f64, f64),
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub integrator: Option<IntegratorConfig>,
    #[serde(default)]
    pub initial_state: InitialState,
    #[serde(default)]
    pub output: Option<OutputSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

/// Integrator settings; the window is the run's window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default)]
    pub method: Method,
    pub dt: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// At the equilibrium at `t₀` with zero momentum.
    #[default]
    Equilibrium,
    /// Absolute lab coordinates.
    Lab { q: Vec2, p: Vec2 },
    /// Displacement from the equilibrium at `t₀`.
    Displaced { dq: Vec2, p: Vec2 },
}

impl InitialState {
    pub fn resolve(&self, sys: &QuadraticSystem, t0: f64) -> crate::Result<PhasePoint> {
        Ok(match self {
            InitialState::Equilibrium => PhasePoint::lab(t0, sys.equilibrium(t0)?, [0.0, 0.0]),
            InitialState::Lab { q, p } => PhasePoint::lab(t0, *q, *p),
            InitialState::Displaced { dq, p } => {
                PhasePoint::lab(t0, crate::linalg::add(sys.equilibrium(t0)?, *dq), *p)
            }
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_tol_sep")]
    pub tol_sep: f64,
    #[serde(default = "default_tol_cond")]
    pub tol_cond: f64,
}

fn default_tol_sep() -> f64 {
    DEFAULT_TOL_SEP
}

fn default_tol_cond() -> f64 {
    DEFAULT_TOL_COND
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_sep: DEFAULT_TOL_SEP,
            tol_cond: DEFAULT_TOL_COND,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepReport {
    #[default]
    Classify,
    Analyze,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub report: SweepReport,
    pub axes: Vec<SweepAxis>,
}

/// One swept scalar, addressed by a JSON pointer into the run config
/// (for example `/preset/masses/0`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub pointer: String,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub end: Option<f64>,
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

impl SweepAxis {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.pointer.clone())
    }

    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        let bad = |msg: &str| CliError::Config(format!("sweep axis {}: {msg}", self.pointer));
        let pts = match (&self.values, self.start, self.end, self.count) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) => match n {
                0 => return Err(bad("count must be at least 1")),
                1 => vec![a],
                _ => crate::modes::uniform_times((a, b), n),
            },
            _ => return Err(bad("give either `values` or all of `start`, `end`, `count`")),
        };
        if pts.is_empty() {
            return Err(bad("no points"));
        }
        if pts.iter().any(|v| !v.is_finite()) {
            return Err(bad("points must be finite"));
        }
        Ok(pts)
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.schema != SCHEMA_VERSION {
            return bad(format!("unsupported schema {}, expected {SCHEMA_VERSION}", self.schema));
        }
        let (t0, t1) = self.window;
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return bad(format!("window ({t0}, {t1}) is empty"));
        }
        if self.samples < 2 {
            return bad(format!("samples must be at least 2, got {}", self.samples));
        }
        if !(self.tolerances.tol_sep > 0.0 && self.tolerances.tol_cond > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if let Some(sweep) = &self.sweep {
            if sweep.axes.is_empty() || sweep.axes.len() > MAX_SWEEP_AXES {
                return bad(format!("a sweep needs 1 to {MAX_SWEEP_AXES} axes"));
            }
            for axis in &sweep.axes {
                axis.points()?;
            }
        }
        Ok(())
    }

    pub fn integrator_spec(&self, dt_override: Option<f64>) -> Result<IntegratorSpec, CliError> {
        let base = self.integrator;
        let dt = dt_override
            .or(base.map(|i| i.dt))
            .ok_or_else(|| CliError::Config("simulate needs `integrator` in the config or --dt".into()))?;
        Ok(IntegratorSpec {
            method: base.map(|i| i.method).unwrap_or_default(),
            dt,
            window: self.window,
        })
    }

    pub fn format(&self) -> OutputFormat {
        self.output.as_ref().map(|o| o.format).unwrap_or_default()
    }

    pub fn output_path(&self) -> Option<PathBuf> {
        self.output.as_ref().and_then(|o| o.path.clone())
    }
}
