use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vec2;
use crate::quadratic::{Coefficients, MassPair, QuadraticSystem, StiffnessTriple};
use crate::schedules::ControlSchedule;

/// One ion in an anisotropic trap with principal frequencies `ω₁, ω₂`
/// whose axes are rotated by `φ(t)`. `q₁, q₂` are the two in-plane
/// Cartesian coordinates, so both masses equal `m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationConfig {
    pub m: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub phi: ControlSchedule,
    #[serde(default)]
    pub larmor_compensation: bool,
}

#[derive(Clone, Debug)]
pub struct RotationModel {
    m: f64,
    omega1: f64,
    omega2: f64,
    phi: ControlSchedule,
    larmor_compensation: bool,
}

impl RotationModel {
    pub fn new(cfg: &RotationConfig) -> Result<Self> {
        for (name, v) in [("m", cfg.m), ("omega1", cfg.omega1), ("omega2", cfg.omega2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        cfg.phi.validate()?;
        let model = RotationModel {
            m: cfg.m,
            omega1: cfg.omega1,
            omega2: cfg.omega2,
            phi: cfg.phi.clone(),
            larmor_compensation: cfg.larmor_compensation,
        };
        if model.is_isotropic() {
            log::info!("isotropic trap: rotation leaves the modes trivially decoupled");
        }
        Ok(model)
    }

    pub fn is_isotropic(&self) -> bool {
        self.omega1 == self.omega2
    }

    pub fn larmor_compensation(&self) -> bool {
        self.larmor_compensation
    }

    /// `ω_L = θ̇ = φ̇`, the rotation rate a magnetic field must cancel.
    pub fn larmor_frequency(&self, t: f64) -> Result<f64> {
        self.phi.derivative(t)
    }

    /// `[ωᵢ² + ω_L²]^{1/2}`, the mode frequencies once the coupling is
    /// cancelled.
    pub fn compensated_frequencies(&self, t: f64) -> Result<Vec2> {
        let wl = self.larmor_frequency(t)?;
        Ok([
            (self.omega1 * self.omega1 + wl * wl).sqrt(),
            (self.omega2 * self.omega2 + wl * wl).sqrt(),
        ])
    }

    fn split(&self) -> f64 {
        self.omega1 * self.omega1 - self.omega2 * self.omega2
    }
}

impl Coefficients for RotationModel {
    fn stiffness(&self, t: f64) -> Result<StiffnessTriple> {
        let phi = self.phi.value(t)?;
        let (s, c) = phi.sin_cos();
        let (w1, w2) = (self.omega1 * self.omega1, self.omega2 * self.omega2);
        let k = -0.5 * self.m * self.split() * (2.0 * phi).sin();
        Ok(StiffnessTriple::new(
            k,
            self.m * (w1 * c * c + w2 * s * s) - k,
            self.m * (w1 * s * s + w2 * c * c) - k,
        ))
    }

    fn stiffness_rate(&self, t: f64) -> Result<StiffnessTriple> {
        let (phi, phi_dot, _) = self.phi.eval(t)?;
        let split = self.m * self.split();
        let k_dot = -split * (2.0 * phi).cos() * phi_dot;
        let sin_term = split * (2.0 * phi).sin() * phi_dot;
        Ok(StiffnessTriple::new(k_dot, -sin_term - k_dot, sin_term - k_dot))
    }

    fn equilibrium(&self, _t: f64) -> Result<Vec2> {
        Ok([0.0, 0.0])
    }

    fn equilibrium_rate(&self, _t: f64) -> Result<Vec2> {
        Ok([0.0, 0.0])
    }

    fn equilibrium_accel(&self, _t: f64) -> Result<Vec2> {
        Ok([0.0, 0.0])
    }

    fn theta_rate(&self, t: f64) -> Option<Result<f64>> {
        if self.is_isotropic() {
            None
        } else {
            Some(self.phi.derivative(t))
        }
    }

    fn full_potential(&self, t: f64, q: Vec2) -> Option<Result<f64>> {
        Some(self.phi.value(t).map(|phi| {
            let (s, c) = phi.sin_cos();
            let x = c * q[0] + s * q[1];
            let y = -s * q[0] + c * q[1];
            0.5 * self.m * (self.omega1 * self.omega1 * x * x + self.omega2 * self.omega2 * y * y)
        }))
    }
}

pub fn build_rotation(cfg: &RotationConfig) -> Result<QuadraticSystem> {
    let model = RotationModel::new(cfg)?;
    Ok(QuadraticSystem::new(MassPair::equal(cfg.m)?, Arc::new(model)))
}
