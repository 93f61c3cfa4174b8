use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{check_cc, default_cc};
use crate::error::{Error, Result};
use crate::linalg::{self, Vec2};
use crate::modes::{modal_matrix, theta_at, uniform_times};
use crate::quadratic::{Coefficients, MassPair, QuadraticSystem, StiffnessTriple};
use crate::roots::solve_phase_gate_cubic;
use crate::schedules::ControlSchedule;

/// Relative mismatch above which a closed-form equilibrium is reported.
pub const FORMULA_TOLERANCE: f64 = 1e-8;

/// Two ions in a static trap pushed by state-dependent forces:
/// `U = ½k₀(q₁² + q₂²) + C/(q₁ − q₂) + F₁q₁ + F₂q₂`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseGateConfig {
    pub k0: f64,
    pub f1: ControlSchedule,
    pub f2: ControlSchedule,
    #[serde(default = "default_cc")]
    pub cc: f64,
    pub masses: MassPair,
    #[serde(default)]
    pub zeroth_order: bool,
}

impl PhaseGateConfig {
    fn validate(&self) -> Result<()> {
        check_cc(self.cc)?;
        if !(self.k0.is_finite() && self.k0 > 0.0) {
            return Err(Error::invalid(format!("k0 must be positive, got {}", self.k0)));
        }
        self.f1.validate()?;
        self.f2.validate()
    }
}

#[derive(Clone, Debug)]
pub struct PhaseGateModel {
    k0: f64,
    f1: ControlSchedule,
    f2: ControlSchedule,
    cc: f64,
}

/// Equilibria from the Cardano-type closed forms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClosedFormEquilibrium {
    pub q1: f64,
    pub q2: f64,
    /// The separation formula as printed alongside the individual ones.
    pub q0_displayed: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscrepancyKind {
    /// `q₁⁽⁰⁾` or `q₂⁽⁰⁾` from the closed forms.
    IndividualEquilibria,
    /// The printed separation `[2B − 2k₀²Δ(F₁+F₂)]/(6k₀³Δ)`.
    DisplayedSeparation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FormulaDiscrepancy {
    pub t: f64,
    pub kind: DiscrepancyKind,
    pub closed_form: f64,
    pub root_solved: f64,
    pub relative_error: f64,
}

/// Root-solved equilibria next to the closed forms at one instant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumAudit {
    pub t: f64,
    pub root: Vec2,
    pub q0: f64,
    /// `None` when the closed form needs a complex cube root.
    pub closed_form: Option<ClosedFormEquilibrium>,
    pub discrepancies: Vec<FormulaDiscrepancy>,
}

struct Distance {
    q0: f64,
    q0_dot: f64,
    sum: f64,
    sum_dot: f64,
}

impl PhaseGateModel {
    pub fn new(cfg: &PhaseGateConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(PhaseGateModel {
            k0: cfg.k0,
            f1: cfg.f1.clone(),
            f2: cfg.f2.clone(),
            cc: cfg.cc,
        })
    }

    fn forces(&self, t: f64) -> Result<(f64, f64, f64, f64)> {
        let (f1, f1d, _) = self.f1.eval(t)?;
        let (f2, f2d, _) = self.f2.eval(t)?;
        Ok((f1, f2, f1d, f2d))
    }

    fn distance(&self, t: f64) -> Result<Distance> {
        let (f1, f2, f1d, f2d) = self.forces(t)?;
        let d = f1 - f2;
        let q0 = solve_phase_gate_cubic(self.k0, d, self.cc, None).map_err(|e| match e {
            Error::InvalidParameter(reason) => Error::preset_domain(t, reason),
            other => other,
        })?;
        // 3k₀q₀² + 2Dq₀ = 6C/q₀² + k₀q₀² > 0 at the root
        let q0_dot = -(f1d - f2d) * q0 * q0 / (3.0 * self.k0 * q0 * q0 + 2.0 * d * q0);
        Ok(Distance {
            q0,
            q0_dot,
            sum: -(f1 + f2) / self.k0,
            sum_dot: -(f1d + f2d) / self.k0,
        })
    }

    /// The closed forms for the equilibria at `t`.
    pub fn closed_form(&self, t: f64) -> Result<Option<ClosedFormEquilibrium>> {
        let (f1, f2, _, _) = self.forces(t)?;
        Ok(closed_form_equilibrium(self.k0, f1, f2, self.cc))
    }

    /// Compares the closed forms against the root solve at `t`.
    pub fn audit(&self, t: f64) -> Result<EquilibriumAudit> {
        let dist = self.distance(t)?;
        let root = [0.5 * (dist.sum + dist.q0), 0.5 * (dist.sum - dist.q0)];
        let closed_form = self.closed_form(t)?;
        let mut discrepancies = Vec::new();
        if let Some(cf) = closed_form {
            let mut check = |kind, closed: f64, solved: f64| {
                let relative_error = (closed - solved).abs() / solved.abs().max(dist.q0);
                if !(relative_error <= FORMULA_TOLERANCE) {
                    discrepancies.push(FormulaDiscrepancy {
                        t,
                        kind,
                        closed_form: closed,
                        root_solved: solved,
                        relative_error,
                    });
                }
            };
            check(DiscrepancyKind::IndividualEquilibria, cf.q1, root[0]);
            check(DiscrepancyKind::IndividualEquilibria, cf.q2, root[1]);
            check(DiscrepancyKind::DisplayedSeparation, cf.q0_displayed, dist.q0);
        }
        Ok(EquilibriumAudit {
            t,
            root,
            q0: dist.q0,
            closed_form,
            discrepancies,
        })
    }
}

/// Cardano-type closed forms for the phase-gate equilibria. Returns `None`
/// when the square root's argument is negative.
pub(crate) fn closed_form_equilibrium(k0: f64, f1: f64, f2: f64, cc: f64) -> Option<ClosedFormEquilibrium> {
    let d = f1 - f2;
    let radicand = 3.0 * cc * k0.powi(14) * (27.0 * cc * k0 * k0 - 2.0 * d.powi(3));
    if radicand < 0.0 {
        return None;
    }
    let delta = (-d.powi(3) * k0.powi(6) + 27.0 * cc * k0.powi(8) + 3.0 * radicand.sqrt()).cbrt();
    if delta == 0.0 || !delta.is_finite() {
        return None;
    }
    let b = d * d * k0.powi(4) + delta * delta;
    let den = 6.0 * k0.powi(3) * delta;
    let k0d = 2.0 * k0 * k0 * delta;
    Some(ClosedFormEquilibrium {
        q1: (b - k0d * (f2 + 2.0 * f1)) / den,
        q2: (-b - k0d * (f1 + 2.0 * f2)) / den,
        q0_displayed: (2.0 * b - k0d * (f1 + f2)) / den,
    })
}

impl Coefficients for PhaseGateModel {
    fn stiffness(&self, t: f64) -> Result<StiffnessTriple> {
        let q0 = self.distance(t)?.q0;
        Ok(StiffnessTriple::new(2.0 * self.cc / q0.powi(3), self.k0, self.k0))
    }

    fn stiffness_rate(&self, t: f64) -> Result<StiffnessTriple> {
        let d = self.distance(t)?;
        Ok(StiffnessTriple::new(-6.0 * self.cc * d.q0_dot / d.q0.powi(4), 0.0, 0.0))
    }

    fn equilibrium(&self, t: f64) -> Result<Vec2> {
        let d = self.distance(t)?;
        Ok([0.5 * (d.sum + d.q0), 0.5 * (d.sum - d.q0)])
    }

    fn equilibrium_rate(&self, t: f64) -> Result<Vec2> {
        let d = self.distance(t)?;
        Ok([0.5 * (d.sum_dot + d.q0_dot), 0.5 * (d.sum_dot - d.q0_dot)])
    }

    fn full_potential(&self, t: f64, q: Vec2) -> Option<Result<f64>> {
        Some(self.forces(t).map(|(f1, f2, _, _)| {
            0.5 * self.k0 * (q[0] * q[0] + q[1] * q[1]) + self.cc / (q[0] - q[1]) + f1 * q[0] + f2 * q[1]
        }))
    }
}

pub fn build_phase_gate(cfg: &PhaseGateConfig) -> Result<QuadraticSystem> {
    Ok(QuadraticSystem::new(cfg.masses, Arc::new(PhaseGateModel::new(cfg)?)))
}

/// Builds the system and audits the closed-form equilibria at `samples`
/// points of `window`, logging every discrepancy.
pub fn build_phase_gate_audited(
    cfg: &PhaseGateConfig,
    window: (f64, f64),
    samples: usize,
) -> Result<(QuadraticSystem, Vec<FormulaDiscrepancy>)> {
    let model = PhaseGateModel::new(cfg)?;
    let mut found = Vec::new();
    for t in uniform_times(window, samples) {
        for d in model.audit(t)?.discrepancies {
            log::warn!(
                "closed-form {:?} differs from the root solve at t={}: {} vs {} (relative {:.3e})",
                d.kind,
                d.t,
                d.closed_form,
                d.root_solved,
                d.relative_error
            );
            found.push(d);
        }
    }
    Ok((QuadraticSystem::new(cfg.masses, Arc::new(model)), found))
}

/// Static two-ion modes with the forces kept aside as a linear drive.
#[derive(Clone, Debug)]
pub struct ZerothOrderPhaseGate {
    k0: f64,
    f1: ControlSchedule,
    f2: ControlSchedule,
    cc: f64,
    masses: MassPair,
}

impl ZerothOrderPhaseGate {
    pub fn system(&self) -> QuadraticSystem {
        QuadraticSystem::new(self.masses, Arc::new(self.clone()))
    }

    fn half_distance(&self) -> f64 {
        (self.cc / (4.0 * self.k0)).cbrt()
    }

    /// Coefficients of the drive in mode coordinates, `A⁻ᵀ (F₁, F₂)`, so
    /// that `F·q = F·q⁽⁰⁾ + mode_drive·Q`.
    pub fn mode_drive(&self, t: f64) -> Result<Vec2> {
        let f = [self.f1.value(t)?, self.f2.value(t)?];
        let k = StiffnessTriple::new(self.k0, self.k0, self.k0).matrix();
        let (_, a_inv) = modal_matrix(theta_at(&k, self.masses, None), self.masses);
        Ok(a_inv.transpose().mul_vec(f))
    }

    /// `F·q⁽⁰⁾`, the drive evaluated at the zeroth-order equilibrium.
    pub fn drive_offset(&self, t: f64) -> Result<f64> {
        let f = [self.f1.value(t)?, self.f2.value(t)?];
        let h = self.half_distance();
        Ok(linalg::dot(f, [h, -h]))
    }
}

impl Coefficients for ZerothOrderPhaseGate {
    fn stiffness(&self, _t: f64) -> Result<StiffnessTriple> {
        Ok(StiffnessTriple::new(self.k0, self.k0, self.k0))
    }

    fn stiffness_rate(&self, _t: f64) -> Result<StiffnessTriple> {
        Ok(StiffnessTriple::new(0.0, 0.0, 0.0))
    }

    fn equilibrium(&self, _t: f64) -> Result<Vec2> {
        let h = self.half_distance();
        Ok([h, -h])
    }

    fn equilibrium_rate(&self, _t: f64) -> Result<Vec2> {
        Ok([0.0, 0.0])
    }

    fn equilibrium_accel(&self, _t: f64) -> Result<Vec2> {
        Ok([0.0, 0.0])
    }

    fn theta_rate(&self, _t: f64) -> Option<Result<f64>> {
        Some(Ok(0.0))
    }

    fn full_potential(&self, _t: f64, q: Vec2) -> Option<Result<f64>> {
        Some(Ok(0.5 * self.k0 * (q[0] * q[0] + q[1] * q[1]) + self.cc / (q[0] - q[1])))
    }
}

pub fn build_phase_gate_zeroth_order(cfg: &PhaseGateConfig) -> Result<ZerothOrderPhaseGate> {
    cfg.validate()?;
    Ok(ZerothOrderPhaseGate {
        k0: cfg.k0,
        f1: cfg.f1.clone(),
        f2: cfg.f2.clone(),
        cc: cfg.cc,
        masses: cfg.masses,
    })
}
