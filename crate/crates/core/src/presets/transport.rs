use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{check_cc, default_cc};
use crate::error::{Error, Result};
use crate::linalg::Vec2;
use crate::quadratic::{Coefficients, MassPair, QuadraticSystem, StiffnessTriple};
use crate::schedules::ControlSchedule;

/// Two ions in a common harmonic trap of stiffness `k(t)` centred at
/// `center(t)`:
/// `U = ½k Σ (qᵢ − Q₀)² + C/(q₁ − q₂)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportConfig {
    pub k: ControlSchedule,
    pub center: ControlSchedule,
    #[serde(default = "default_cc")]
    pub cc: f64,
    pub masses: MassPair,
}

#[derive(Clone, Debug)]
pub struct TransportModel {
    k: ControlSchedule,
    center: ControlSchedule,
    cc: f64,
}

/// Ion distance `q₀ = (2C/k)^{1/3}` and its first two derivatives.
struct Separation {
    q0: f64,
    q0_dot: f64,
    q0_ddot: f64,
}

impl TransportModel {
    pub fn new(cfg: &TransportConfig) -> Result<Self> {
        check_cc(cfg.cc)?;
        cfg.k.validate()?;
        cfg.center.validate()?;
        Ok(TransportModel {
            k: cfg.k.clone(),
            center: cfg.center.clone(),
            cc: cfg.cc,
        })
    }

    fn trap(&self, t: f64) -> Result<(f64, f64, f64)> {
        let (k, kd, kdd) = self.k.eval(t)?;
        if !(k > 0.0) {
            return Err(Error::preset_domain(t, format!("trap stiffness must be positive, got {k}")));
        }
        Ok((k, kd, kdd))
    }

    fn separation(&self, t: f64) -> Result<Separation> {
        let (k, kd, kdd) = self.trap(t)?;
        let q0 = (2.0 * self.cc / k).cbrt();
        let q0_dot = -q0 * kd / (3.0 * k);
        let q0_ddot = -(q0_dot * kd + q0 * kdd) / (3.0 * k) + q0 * kd * kd / (3.0 * k * k);
        Ok(Separation {
            q0,
            q0_dot,
            q0_ddot,
        })
    }

    /// `tan 2θ = √(m₁m₂)/(m₁ − m₂)`, independent of time.
    pub fn closed_form_theta(masses: MassPair) -> f64 {
        let (m1, m2) = (masses.m1(), masses.m2());
        let raw = 0.5 * (m1 * m2).sqrt().atan2(m1 - m2);
        // same branch convention as `modes::theta_at`
        if raw > std::f64::consts::FRAC_PI_4 {
            raw - std::f64::consts::FRAC_PI_2
        } else {
            raw
        }
    }
}

impl Coefficients for TransportModel {
    fn stiffness(&self, t: f64) -> Result<StiffnessTriple> {
        let (k, _, _) = self.trap(t)?;
        Ok(StiffnessTriple::new(k, k, k))
    }

    fn stiffness_rate(&self, t: f64) -> Result<StiffnessTriple> {
        let (_, kd, _) = self.trap(t)?;
        Ok(StiffnessTriple::new(kd, kd, kd))
    }

    fn equilibrium(&self, t: f64) -> Result<Vec2> {
        let center = self.center.value(t)?;
        let half = 0.5 * self.separation(t)?.q0;
        Ok([center + half, center - half])
    }

    fn equilibrium_rate(&self, t: f64) -> Result<Vec2> {
        let v = self.center.derivative(t)?;
        let half = 0.5 * self.separation(t)?.q0_dot;
        Ok([v + half, v - half])
    }

    fn equilibrium_accel(&self, t: f64) -> Result<Vec2> {
        let a = self.center.second_derivative(t)?;
        let half = 0.5 * self.separation(t)?.q0_ddot;
        Ok([a + half, a - half])
    }

    fn theta_rate(&self, t: f64) -> Option<Result<f64>> {
        Some(self.trap(t).map(|_| 0.0))
    }

    fn full_potential(&self, t: f64, q: Vec2) -> Option<Result<f64>> {
        Some((|| {
            let k = self.k.value(t)?;
            let c = self.center.value(t)?;
            Ok(0.5 * k * ((q[0] - c).powi(2) + (q[1] - c).powi(2)) + self.cc / (q[0] - q[1]))
        })())
    }
}

pub fn build_transport(cfg: &TransportConfig) -> Result<QuadraticSystem> {
    Ok(QuadraticSystem::new(cfg.masses, Arc::new(TransportModel::new(cfg)?)))
}
