use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vec2;
use crate::quadratic::{Coefficients, MassPair, QuadraticSystem, StiffnessTriple};
use crate::schedules::ControlSchedule;

/// Two masses between walls a distance `d` apart: mass 1 tied to the left
/// wall by `k₁`, mass 2 to the right wall by `k₂`, and to each other by
/// `k`, all springs of zero rest length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpringsConfig {
    pub k: ControlSchedule,
    pub k1: ControlSchedule,
    pub k2: ControlSchedule,
    pub d: f64,
    pub masses: MassPair,
}

#[derive(Clone, Debug)]
pub struct SpringsModel {
    k: ControlSchedule,
    k1: ControlSchedule,
    k2: ControlSchedule,
    d: f64,
}

impl SpringsModel {
    pub fn new(cfg: &SpringsConfig) -> Result<Self> {
        if !(cfg.d.is_finite() && cfg.d > 0.0) {
            return Err(Error::invalid(format!("wall separation must be positive, got {}", cfg.d)));
        }
        for s in [&cfg.k, &cfg.k1, &cfg.k2] {
            s.validate()?;
        }
        Ok(SpringsModel {
            k: cfg.k.clone(),
            k1: cfg.k1.clone(),
            k2: cfg.k2.clone(),
            d: cfg.d,
        })
    }

    fn springs(&self, t: f64) -> Result<[(f64, f64); 3]> {
        let (k, kd, _) = self.k.eval(t)?;
        let (k1, k1d, _) = self.k1.eval(t)?;
        let (k2, k2d, _) = self.k2.eval(t)?;
        Ok([(k, kd), (k1, k1d), (k2, k2d)])
    }

    fn denominator(t: f64, k: f64, k1: f64, k2: f64) -> Result<f64> {
        let den = k1 * k2 + k * (k1 + k2);
        if den == 0.0 {
            return Err(Error::Singular {
                t,
                reason: "k1*k2 + k*(k1 + k2) vanishes".into(),
            });
        }
        Ok(den)
    }
}

impl Coefficients for SpringsModel {
    fn stiffness(&self, t: f64) -> Result<StiffnessTriple> {
        Ok(StiffnessTriple::new(self.k.value(t)?, self.k1.value(t)?, self.k2.value(t)?))
    }

    fn stiffness_rate(&self, t: f64) -> Result<StiffnessTriple> {
        Ok(StiffnessTriple::new(
            self.k.derivative(t)?,
            self.k1.derivative(t)?,
            self.k2.derivative(t)?,
        ))
    }

    fn equilibrium(&self, t: f64) -> Result<Vec2> {
        let [(k, _), (k1, _), (k2, _)] = self.springs(t)?;
        let den = Self::denominator(t, k, k1, k2)?;
        Ok([self.d * k * k2 / den, self.d * k2 * (k + k1) / den])
    }

    fn equilibrium_rate(&self, t: f64) -> Result<Vec2> {
        let [(k, kd), (k1, k1d), (k2, k2d)] = self.springs(t)?;
        let den = Self::denominator(t, k, k1, k2)?;
        let den_dot = k1d * k2 + k1 * k2d + kd * (k1 + k2) + k * (k1d + k2d);
        let n1 = k * k2;
        let n1_dot = kd * k2 + k * k2d;
        let n2 = k2 * (k + k1);
        let n2_dot = k2d * (k + k1) + k2 * (kd + k1d);
        Ok([
            self.d * (n1_dot * den - n1 * den_dot) / (den * den),
            self.d * (n2_dot * den - n2 * den_dot) / (den * den),
        ])
    }

    fn full_potential(&self, t: f64, q: Vec2) -> Option<Result<f64>> {
        Some(self.springs(t).map(|[(k, _), (k1, _), (k2, _)]| {
            0.5 * k1 * q[0] * q[0] + 0.5 * k2 * (self.d - q[1]).powi(2) + 0.5 * k * (q[1] - q[0]).powi(2)
        }))
    }
}

pub fn build_springs(cfg: &SpringsConfig) -> Result<QuadraticSystem> {
    Ok(QuadraticSystem::new(cfg.masses, Arc::new(SpringsModel::new(cfg)?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes;
    use approx::assert_abs_diff_eq;

    fn cfg(k: ControlSchedule, k1: ControlSchedule, k2: ControlSchedule, m: (f64, f64)) -> SpringsConfig {
        SpringsConfig {
            k,
            k1,
            k2,
            d: 3.0,
            masses: MassPair::new(m.0, m.1).unwrap(),
        }
    }

    fn c(v: f64) -> ControlSchedule {
        ControlSchedule::constant(v)
    }

    #[test]
    fn unit_springs() {
        let sys = build_springs(&cfg(c(1.0), c(1.0), c(1.0), (1.0, 1.0))).unwrap();
        assert_eq!(sys.equilibrium(0.0).unwrap(), [1.0, 2.0]);
        let dec = modes::decompose_at(&sys, 0.0, None).unwrap();
        assert_abs_diff_eq!(dec.theta, std::f64::consts::FRAC_PI_4);
    }

    #[test]
    fn symmetric_outer_springs_center_the_pair() {
        let sys = build_springs(&cfg(c(0.7), c(2.3), c(2.3), (1.0, 5.0))).unwrap();
        let eq = sys.equilibrium(0.0).unwrap();
        assert_abs_diff_eq!(eq[0] + eq[1], 3.0, epsilon = 1e-15);
    }

    #[test]
    fn uncoupled_masses() {
        let sys = build_springs(&cfg(
            c(0.0),
            ControlSchedule::linear_ramp(0.0, 1.0, 1.0, 3.0).unwrap(),
            ControlSchedule::smoothstep(0.0, 1.0, 2.0, 0.5).unwrap(),
            (1.0, 2.0),
        ))
        .unwrap();
        for &t in &[0.0, 0.4, 0.9] {
            assert_eq!(sys.equilibrium(t).unwrap(), [0.0, 3.0]);
            assert_eq!(sys.stiffness(t).unwrap().k, 0.0);
            assert_eq!(modes::theta_dot_chain_rule(&sys, t).unwrap(), 0.0);
        }
    }

    #[test]
    fn singular_configuration() {
        let sys = build_springs(&cfg(c(-0.5), c(1.0), c(1.0), (1.0, 1.0))).unwrap();
        assert!(matches!(sys.equilibrium(0.0), Err(Error::Singular { .. })));
    }

    #[test]
    fn rates_agree_with_finite_differences() {
        let sys = build_springs(&cfg(
            ControlSchedule::polynomial(vec![1.0, 0.2, 0.1]),
            ControlSchedule::linear_ramp(0.0, 1.0, 1.0, 3.0).unwrap(),
            ControlSchedule::smoothstep(0.0, 1.0, 2.0, 0.5).unwrap(),
            (1.0, 2.0),
        ))
        .unwrap();
        for &t in &[0.2, 0.5, 0.8] {
            assert!(crate::quadratic::equilibrium_rate_consistency(&sys, t).unwrap() < 1e-8);
        }
    }

    #[test]
    fn nonpositive_wall_separation() {
        let mut bad = cfg(c(1.0), c(1.0), c(1.0), (1.0, 1.0));
        bad.d = 0.0;
        assert!(build_springs(&bad).is_err());
    }
}
