//! Fixed-step integration in the lab and mode frames.
//!
//! Lab frame: `q̇ = M⁻¹p`, `ṗ = −K(t)(q − q⁽⁰⁾(t))`.
//!
//! Mode frame, from `H̃ = ½Σ(Pᵢ² + Ωᵢ²Qᵢ²) − P·P₀ − θ̇ L_z`:
//!
//! ```text
//! Q̇ = P − P₀ + θ̇ J Q
//! Ṗ = −Ω² Q + θ̇ J P
//! ```
//!
//! with `J = [[0, 1], [−1, 0]]`. The decomposition is re-evaluated at every
//! Runge-Kutta stage, with θ tracked from the start of the step.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Vec2, J};
use crate::modes::{self, ModeDecomposition};
use crate::quadratic::{Frame, PhasePoint, QuadraticSystem};

/// Largest number of steps a single integration may take.
pub const MAX_STEPS: usize = 20_000_000;

/// State components beyond this magnitude abort the integration.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Rk4,
    /// Kick-drift-kick leapfrog; lab frame only.
    VelocityVerlet,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Rk4 => "rk4",
            Method::VelocityVerlet => "velocity-verlet",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default)]
    pub method: Method,
    pub dt: f64,
    pub window: (f64, f64),
}

impl IntegratorSpec {
    pub fn rk4(dt: f64, window: (f64, f64)) -> Self {
        IntegratorSpec {
            method: Method::Rk4,
            dt,
            window,
        }
    }

    /// Number of steps and the step actually used, `(t1 − t0)/n`.
    pub fn grid(&self) -> Result<(usize, f64)> {
        let (t0, t1) = self.window;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(Error::invalid(format!("window ({t0}, {t1}) is empty")));
        }
        let n = ((t1 - t0) / self.dt).round();
        if n > MAX_STEPS as f64 {
            return Err(Error::invalid(format!("{n} steps exceed the cap of {MAX_STEPS}")));
        }
        let n = (n as usize).max(1);
        Ok((n, (t1 - t0) / n as f64))
    }

    fn time(&self, i: usize, n: usize, h: f64) -> f64 {
        if i == n {
            self.window.1
        } else {
            self.window.0 + h * i as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMetadata {
    pub preset: Option<String>,
    pub integrator: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub frame: Frame,
    pub samples: Vec<PhasePoint>,
    pub dt: f64,
    pub metadata: TrajectoryMetadata,
}

impl Trajectory {
    fn empty(frame: Frame, dt: f64, method: Method) -> Self {
        Trajectory {
            frame,
            samples: Vec::new(),
            dt,
            metadata: TrajectoryMetadata {
                preset: None,
                integrator: method.name().to_string(),
            },
        }
    }

    pub fn with_preset(mut self, fingerprint: impl Into<String>) -> Self {
        self.metadata.preset = Some(fingerprint.into());
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&PhasePoint> {
        self.samples.last()
    }
}

/// Switches for the mode-frame equations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModeIntegrationOptions {
    /// Add `½ω_L²|Q|² + ω_L L_z` with `ω_L = θ̇`.
    pub apply_larmor: bool,
    /// Keep the `−θ̇ L_z` term of `H̃`. Only switched off to show that the
    /// frames then disagree.
    pub rotation_coupling: bool,
}

impl Default for ModeIntegrationOptions {
    fn default() -> Self {
        ModeIntegrationOptions {
            apply_larmor: false,
            rotation_coupling: true,
        }
    }
}

type State = [f64; 4];

fn axpy(x: &State, a: f64, k: &State) -> State {
    [x[0] + a * k[0], x[1] + a * k[1], x[2] + a * k[2], x[3] + a * k[3]]
}

fn diverged(x: &State) -> bool {
    x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT)
}

/// Classic RK4 over the integrator grid. `f(t, x, branch)` receives the θ
/// branch reference held at the start of the step; `advance(t, x)`
/// returns the branch reference for the next step.
fn run_rk4<F, B>(
    spec: &IntegratorSpec,
    x0: &PhasePoint,
    frame: Frame,
    mut branch: Option<f64>,
    f: F,
    advance: B,
) -> Result<Trajectory>
where
    F: Fn(f64, &State, Option<f64>) -> Result<State>,
    B: Fn(f64, Option<f64>) -> Result<Option<f64>>,
{
    let (n, h) = spec.grid()?;
    let mut traj = Trajectory::empty(frame, h, spec.method);
    traj.samples.reserve(n + 1);
    let mut x = x0.state();
    let t0 = spec.time(0, n, h);
    if diverged(&x) {
        return Err(Error::invalid("initial state is not finite or exceeds the divergence limit"));
    }
    traj.samples.push(PhasePoint::from_state(t0, x, frame));
    for i in 0..n {
        let t = spec.time(i, n, h);
        let t_next = spec.time(i + 1, n, h);
        let step = t_next - t;
        let k1 = f(t, &x, branch)?;
        let k2 = f(t + 0.5 * step, &axpy(&x, 0.5 * step, &k1), branch)?;
        let k3 = f(t + 0.5 * step, &axpy(&x, 0.5 * step, &k2), branch)?;
        let k4 = f(t_next, &axpy(&x, step, &k3), branch)?;
        for j in 0..4 {
            x[j] += step / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        if diverged(&x) {
            return Err(Error::Divergence {
                t: t_next,
                partial: Box::new(traj),
            });
        }
        branch = advance(t_next, branch)?;
        traj.samples.push(PhasePoint::from_state(t_next, x, frame));
    }
    Ok(traj)
}

fn check_start(x0: &PhasePoint, frame: Frame, spec: &IntegratorSpec) -> Result<()> {
    x0.expect_frame(frame)?;
    if (x0.t - spec.window.0).abs() > 1e-12 * (1.0 + spec.window.0.abs()) {
        return Err(Error::invalid(format!(
            "initial time {} differs from the window start {}",
            x0.t, spec.window.0
        )));
    }
    Ok(())
}

fn next_branch(sys: &QuadraticSystem, t: f64, branch: Option<f64>) -> Result<Option<f64>> {
    let k = sys.stiffness_matrix_at(t)?;
    Ok(Some(modes::theta_at(&k, sys.masses(), branch)))
}

/// Lab-frame right-hand side, optionally with the Larmor term pulled back
/// from the mode frame.
fn lab_rhs(sys: &QuadraticSystem, t: f64, x: &State, larmor: Option<Option<f64>>) -> Result<State> {
    let masses = sys.masses();
    let k = sys.stiffness_matrix_at(t)?;
    let q0 = sys.equilibrium(t)?;
    let d = linalg::sub([x[0], x[1]], q0);
    let p = [x[2], x[3]];
    let f = k.mul_vec(d);
    let mut out = [p[0] / masses.m1(), p[1] / masses.m2(), -f[0], -f[1]];
    if let Some(branch) = larmor {
        let dec = modes::decompose_at(sys, t, branch)?;
        let wl = dec.theta_dot;
        let dq = (dec.a_inv * J * dec.a).mul_vec(d);
        let dp1 = (dec.a.transpose() * dec.a).mul_vec(d);
        let dp2 = (dec.a.transpose() * J * dec.a_inv_t()).mul_vec(p);
        out[0] -= wl * dq[0];
        out[1] -= wl * dq[1];
        out[2] -= wl * wl * dp1[0] + wl * dp2[0];
        out[3] -= wl * wl * dp1[1] + wl * dp2[1];
    }
    Ok(out)
}

/// Integrates the lab-frame equations.
pub fn integrate_lab(sys: &QuadraticSystem, x0: &PhasePoint, spec: &IntegratorSpec) -> Result<Trajectory> {
    integrate_lab_with(sys, x0, spec, false)
}

/// Lab-frame integration; `apply_larmor` adds the magnetic term that
/// cancels `θ̇ L_z` in the mode frame.
pub fn integrate_lab_with(
    sys: &QuadraticSystem,
    x0: &PhasePoint,
    spec: &IntegratorSpec,
    apply_larmor: bool,
) -> Result<Trajectory> {
    check_start(x0, Frame::Lab, spec)?;
    match spec.method {
        Method::Rk4 if apply_larmor => run_rk4(
            spec,
            x0,
            Frame::Lab,
            next_branch(sys, x0.t, None)?,
            |t, x, b| lab_rhs(sys, t, x, Some(b)),
            |t, b| next_branch(sys, t, b),
        ),
        Method::Rk4 => run_rk4(
            spec,
            x0,
            Frame::Lab,
            None,
            |t, x, _| lab_rhs(sys, t, x, None),
            |_, b| Ok(b),
        ),
        Method::VelocityVerlet if apply_larmor => Err(Error::invalid(
            "velocity-verlet needs a separable Hamiltonian; the Larmor term is not",
        )),
        Method::VelocityVerlet => velocity_verlet(sys, x0, spec),
    }
}

fn velocity_verlet(sys: &QuadraticSystem, x0: &PhasePoint, spec: &IntegratorSpec) -> Result<Trajectory> {
    let (n, h) = spec.grid()?;
    let masses = sys.masses();
    let mut traj = Trajectory::empty(Frame::Lab, h, spec.method);
    traj.samples.reserve(n + 1);
    let mut x = x0.state();
    traj.samples.push(PhasePoint::from_state(spec.time(0, n, h), x, Frame::Lab));
    let force = |t: f64, q: Vec2| -> Result<Vec2> {
        let f = sys.stiffness_matrix_at(t)?.mul_vec(linalg::sub(q, sys.equilibrium(t)?));
        Ok([-f[0], -f[1]])
    };
    let mut f = force(spec.time(0, n, h), [x[0], x[1]])?;
    for i in 0..n {
        let t_next = spec.time(i + 1, n, h);
        let step = t_next - spec.time(i, n, h);
        x[2] += 0.5 * step * f[0];
        x[3] += 0.5 * step * f[1];
        x[0] += step * x[2] / masses.m1();
        x[1] += step * x[3] / masses.m2();
        f = force(t_next, [x[0], x[1]])?;
        x[2] += 0.5 * step * f[0];
        x[3] += 0.5 * step * f[1];
        if diverged(&x) {
            return Err(Error::Divergence {
                t: t_next,
                partial: Box::new(traj),
            });
        }
        traj.samples.push(PhasePoint::from_state(t_next, x, Frame::Lab));
    }
    Ok(traj)
}

fn mode_rhs(
    sys: &QuadraticSystem,
    t: f64,
    x: &State,
    branch: Option<f64>,
    opts: ModeIntegrationOptions,
) -> Result<State> {
    let dec = modes::decompose_at(sys, t, branch)?;
    let (q, p) = ([x[0], x[1]], [x[2], x[3]]);
    let p0 = dec.p0();
    let mut qdot = linalg::sub(p, p0);
    let mut pdot = [-dec.omega1_sq * q[0], -dec.omega2_sq * q[1]];
    let td = dec.theta_dot;
    if opts.rotation_coupling {
        qdot = linalg::add(qdot, linalg::scale(J.mul_vec(q), td));
        pdot = linalg::add(pdot, linalg::scale(J.mul_vec(p), td));
    }
    if opts.apply_larmor {
        qdot = linalg::sub(qdot, linalg::scale(J.mul_vec(q), td));
        pdot = linalg::sub(pdot, linalg::add(linalg::scale(q, td * td), linalg::scale(J.mul_vec(p), td)));
    }
    Ok([qdot[0], qdot[1], pdot[0], pdot[1]])
}

/// Integrates the mode-frame equations of `H̃` (plus the Larmor term when
/// `apply_larmor`). RK4 only.
pub fn integrate_modes(
    sys: &QuadraticSystem,
    x0: &PhasePoint,
    spec: &IntegratorSpec,
    apply_larmor: bool,
) -> Result<Trajectory> {
    integrate_modes_with(
        sys,
        x0,
        spec,
        ModeIntegrationOptions {
            apply_larmor,
            ..Default::default()
        },
    )
}

pub fn integrate_modes_with(
    sys: &QuadraticSystem,
    x0: &PhasePoint,
    spec: &IntegratorSpec,
    opts: ModeIntegrationOptions,
) -> Result<Trajectory> {
    check_start(x0, Frame::Mode, spec)?;
    require_rk4(spec)?;
    run_rk4(
        spec,
        x0,
        Frame::Mode,
        next_branch(sys, x0.t, None)?,
        |t, x, b| mode_rhs(sys, t, x, b, opts),
        |t, b| next_branch(sys, t, b),
    )
}

fn require_rk4(spec: &IntegratorSpec) -> Result<()> {
    if spec.method != Method::Rk4 {
        return Err(Error::invalid("the mode frame is not separable; use rk4"));
    }
    Ok(())
}

/// Integrates the shifted variables `(Q, P′ = P − P₀)`:
/// `Q̇ = P′ + θ̇JQ`, `Ṗ′ = −Ω²Q + θ̇J(P′ + P₀) − Ṗ₀`.
/// The initial point carries `P′`; so do the returned samples.
pub fn integrate_shifted(
    sys: &QuadraticSystem,
    x0: &PhasePoint,
    spec: &IntegratorSpec,
    apply_larmor: bool,
) -> Result<Trajectory> {
    check_start(x0, Frame::Mode, spec)?;
    require_rk4(spec)?;
    let rhs = |t: f64, x: &State, b: Option<f64>| -> Result<State> {
        let dec = modes::decompose_at(sys, t, b)?;
        let (q, ps) = ([x[0], x[1]], [x[2], x[3]]);
        let p0 = dec.p0();
        let p0_rate = modes::p0_rate(&dec, sys)?;
        let td = dec.theta_dot;
        let p = linalg::add(ps, p0);
        let mut qdot = linalg::add(ps, linalg::scale(J.mul_vec(q), td));
        let mut pdot = [
            -dec.omega1_sq * q[0] + td * J.mul_vec(p)[0] - p0_rate[0],
            -dec.omega2_sq * q[1] + td * J.mul_vec(p)[1] - p0_rate[1],
        ];
        if apply_larmor {
            qdot = linalg::sub(qdot, linalg::scale(J.mul_vec(q), td));
            pdot = linalg::sub(pdot, linalg::add(linalg::scale(q, td * td), linalg::scale(J.mul_vec(p), td)));
        }
        Ok([qdot[0], qdot[1], pdot[0], pdot[1]])
    };
    run_rk4(
        spec,
        x0,
        Frame::Mode,
        next_branch(sys, x0.t, None)?,
        rhs,
        |t, b| next_branch(sys, t, b),
    )
}

/// Decompositions at every sample time of `traj`, θ threaded.
pub fn decompositions_along(sys: &QuadraticSystem, traj: &Trajectory) -> Result<Vec<ModeDecomposition>> {
    let times: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    modes::decompose_series(sys, &times)
}

/// Maps a lab trajectory sample by sample into mode coordinates.
pub fn map_to_modes(sys: &QuadraticSystem, lab: &Trajectory) -> Result<Trajectory> {
    if lab.frame != Frame::Lab {
        return Err(Error::FrameMismatch {
            expected: Frame::Lab,
            found: lab.frame,
        });
    }
    let decs = decompositions_along(sys, lab)?;
    let samples = lab
        .samples
        .iter()
        .zip(&decs)
        .map(|(x, dec)| modes::to_mode_frame(dec, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        frame: Frame::Mode,
        samples,
        dt: lab.dt,
        metadata: lab.metadata.clone(),
    })
}

#[derive(Clone, Debug)]
pub struct FrameEquivalence {
    pub lab: Trajectory,
    pub mode: Trajectory,
    pub mapped: Trajectory,
    /// `max_t |X_mapped − X_mode| / max_t |X_mapped|`.
    pub max_deviation: f64,
}

/// Normalised maximum phase-space distance between two trajectories
/// sampled at the same times.
pub fn trajectory_deviation(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "trajectories have {} and {} samples",
            a.len(),
            b.len()
        )));
    }
    let norm = |s: &State| s.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for (x, y) in a.samples.iter().zip(&b.samples) {
        let (sx, sy) = (x.state(), y.state());
        let diff = [sx[0] - sy[0], sx[1] - sy[1], sx[2] - sy[2], sx[3] - sy[3]];
        worst = worst.max(norm(&diff));
        scale = scale.max(norm(&sx));
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

pub fn frame_equivalence_check(
    sys: &QuadraticSystem,
    x0_lab: &PhasePoint,
    spec: &IntegratorSpec,
) -> Result<FrameEquivalence> {
    frame_equivalence_check_with(sys, x0_lab, spec, ModeIntegrationOptions::default())
}

/// Integrates in the lab frame, maps the result into mode coordinates and
/// compares it with a direct mode-frame integration from the mapped start.
pub fn frame_equivalence_check_with(
    sys: &QuadraticSystem,
    x0_lab: &PhasePoint,
    spec: &IntegratorSpec,
    opts: ModeIntegrationOptions,
) -> Result<FrameEquivalence> {
    let lab = integrate_lab_with(sys, x0_lab, spec, opts.apply_larmor)?;
    let mapped = map_to_modes(sys, &lab)?;
    let mode = integrate_modes_with(sys, &mapped.samples[0], &IntegratorSpec { method: Method::Rk4, ..*spec }, opts)?;
    let max_deviation = trajectory_deviation(&mapped, &mode)?;
    Ok(FrameEquivalence {
        lab,
        mode,
        mapped,
        max_deviation,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyAudit {
    pub frame: Frame,
    pub values: Vec<f64>,
    /// `max |H(t) − H(t₀)| / max(|H(t₀)|, ε)`.
    pub max_relative_drift: f64,
}

/// `H(t)` along a lab trajectory or `H̃(t)` along a mode trajectory.
pub fn energy_audit(traj: &Trajectory, sys: &QuadraticSystem) -> Result<EnergyAudit> {
    let values = match traj.frame {
        Frame::Lab => traj
            .samples
            .iter()
            .map(|x| sys.hamiltonian_value(x))
            .collect::<Result<Vec<_>>>()?,
        Frame::Mode => {
            let decs = decompositions_along(sys, traj)?;
            traj.samples
                .iter()
                .zip(&decs)
                .map(|(x, dec)| modes::effective_hamiltonian_value(dec, x))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let h0 = values.first().copied().unwrap_or(0.0);
    let worst = values.iter().fold(0.0f64, |m, h| m.max((h - h0).abs()));
    Ok(EnergyAudit {
        frame: traj.frame,
        max_relative_drift: worst / h0.abs().max(f64::MIN_POSITIVE),
        values,
    })
}

fn header(frame: Frame) -> [&'static str; 6] {
    match frame {
        Frame::Lab => ["t", "q1", "q2", "p1", "p2", "frame"],
        Frame::Mode => ["t", "Q1", "Q2", "P1", "P2", "frame"],
    }
}

fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `traj` as CSV with 17 significant digits and LF line endings.
pub fn write_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let io = |e: csv::Error| Error::invalid(format!("csv write failed: {e}"));
    w.write_record(header(traj.frame)).map_err(io)?;
    let frame = traj.frame.to_string();
    for x in &traj.samples {
        let s = x.state();
        w.write_record([
            format_float(x.t),
            format_float(s[0]),
            format_float(s[1]),
            format_float(s[2]),
            format_float(s[3]),
            frame.clone(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::invalid(format!("csv write failed: {e}")))?;
    Ok(())
}

/// Reads a trajectory written by [`write_csv`].
pub fn read_csv<R: Read>(input: R) -> Result<Trajectory> {
    let mut r = csv::Reader::from_reader(input);
    let bad = |msg: String| Error::invalid(format!("malformed trajectory csv: {msg}"));
    let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let frame = if headers.iter().eq(header(Frame::Lab)) {
        Frame::Lab
    } else if headers.iter().eq(header(Frame::Mode)) {
        Frame::Mode
    } else {
        return Err(bad(format!("unexpected header {headers:?}")));
    };
    let mut samples = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        if record.get(5) != Some(frame.to_string().as_str()) {
            return Err(bad("frame column does not match the header".into()));
        }
        let mut v = [0.0; 5];
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = record
                .get(i)
                .ok_or_else(|| bad("short record".into()))?
                .parse()
                .map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
        }
        samples.push(PhasePoint::from_state(v[0], [v[1], v[2], v[3], v[4]], frame));
    }
    let dt = match samples.as_slice() {
        [a, b, ..] => b.t - a.t,
        _ => 0.0,
    };
    Ok(Trajectory {
        frame,
        samples,
        dt,
        metadata: TrajectoryMetadata {
            preset: None,
            integrator: "csv".into(),
        },
    })
}
