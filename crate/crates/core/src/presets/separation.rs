use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{check_cc, default_cc};
use crate::error::{Error, Result};
use crate::linalg::Vec2;
use crate::modes::uniform_times;
use crate::quadratic::{Coefficients, MassPair, QuadraticSystem, StiffnessTriple};
use crate::roots::solve_separation_quintic;
use crate::schedules::ControlSchedule;

/// Default relative tolerance on the constancy of `β³/α⁵`.
pub const DEFAULT_TOL_COND: f64 = 1e-9;

/// Two ions in a double-well potential
/// `U = α(q₁² + q₂²) + β(q₁⁴ + q₂⁴) + C/(q₁ − q₂)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparationConfig {
    pub alpha: ControlSchedule,
    pub beta: ControlSchedule,
    #[serde(default = "default_cc")]
    pub cc: f64,
    pub masses: MassPair,
}

#[derive(Clone, Debug)]
pub struct SeparationModel {
    alpha: ControlSchedule,
    beta: ControlSchedule,
    cc: f64,
}

struct Distance {
    q0: f64,
    q0_dot: f64,
    alpha: (f64, f64),
    beta: (f64, f64),
}

impl SeparationModel {
    pub fn new(cfg: &SeparationConfig) -> Result<Self> {
        check_cc(cfg.cc)?;
        cfg.alpha.validate()?;
        cfg.beta.validate()?;
        Ok(SeparationModel {
            alpha: cfg.alpha.clone(),
            beta: cfg.beta.clone(),
            cc: cfg.cc,
        })
    }

    /// Positive root of `βq⁵ + 2αq³ − 2C = 0` at time `t`.
    pub fn distance(&self, t: f64) -> Result<f64> {
        let alpha = self.alpha.value(t)?;
        let beta = self.beta.value(t)?;
        solve_separation_quintic(alpha, beta, self.cc, None).map_err(|e| match e {
            Error::InvalidParameter(reason) => Error::preset_domain(t, reason),
            other => other,
        })
    }

    fn distance_with_rate(&self, t: f64) -> Result<Distance> {
        let (a, ad, _) = self.alpha.eval(t)?;
        let (b, bd, _) = self.beta.eval(t)?;
        let q0 = self.distance(t)?;
        let den = 5.0 * b * q0.powi(4) + 6.0 * a * q0 * q0;
        if den == 0.0 || !den.is_finite() {
            return Err(Error::Singular {
                t,
                reason: format!("5βq0^4 + 6αq0^2 vanishes at q0 = {q0}"),
            });
        }
        let q0_dot = -(q0.powi(5) * bd + 2.0 * q0.powi(3) * ad) / den;
        Ok(Distance {
            q0,
            q0_dot,
            alpha: (a, ad),
            beta: (b, bd),
        })
    }
}

impl Coefficients for SeparationModel {
    fn stiffness(&self, t: f64) -> Result<StiffnessTriple> {
        let q0 = self.distance(t)?;
        let alpha = self.alpha.value(t)?;
        let beta = self.beta.value(t)?;
        let kk = 2.0 * alpha + 3.0 * beta * q0 * q0;
        Ok(StiffnessTriple::new(2.0 * self.cc / q0.powi(3), kk, kk))
    }

    fn stiffness_rate(&self, t: f64) -> Result<StiffnessTriple> {
        let d = self.distance_with_rate(t)?;
        let k_dot = -6.0 * self.cc * d.q0_dot / d.q0.powi(4);
        let kk_dot = 2.0 * d.alpha.1 + 3.0 * d.beta.1 * d.q0 * d.q0 + 6.0 * d.beta.0 * d.q0 * d.q0_dot;
        Ok(StiffnessTriple::new(k_dot, kk_dot, kk_dot))
    }

    fn equilibrium(&self, t: f64) -> Result<Vec2> {
        let half = 0.5 * self.distance(t)?;
        Ok([half, -half])
    }

    fn equilibrium_rate(&self, t: f64) -> Result<Vec2> {
        let half = 0.5 * self.distance_with_rate(t)?.q0_dot;
        Ok([half, -half])
    }

    fn full_potential(&self, t: f64, q: Vec2) -> Option<Result<f64>> {
        Some((|| {
            let a = self.alpha.value(t)?;
            let b = self.beta.value(t)?;
            Ok(a * (q[0] * q[0] + q[1] * q[1])
                + b * (q[0].powi(4) + q[1].powi(4))
                + self.cc / (q[0] - q[1]))
        })())
    }
}

pub fn build_separation(cfg: &SeparationConfig) -> Result<QuadraticSystem> {
    Ok(QuadraticSystem::new(cfg.masses, Arc::new(SeparationModel::new(cfg)?)))
}

/// Outcome of checking the mass-independent decoupling condition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationCondition {
    pub holds: bool,
    /// Relative spread of `β³/α⁵` over the samples.
    pub ratio_deviation: f64,
    /// Relative spread of `βq₀⁵`.
    pub beta_q0_5_deviation: f64,
    /// Relative spread of `αq₀³`.
    pub alpha_q0_3_deviation: f64,
}

fn relative_spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        0.0
    } else {
        (max - min) / scale
    }
}

/// Checks whether `β³/α⁵` stays constant over `window`, which decouples
/// the modes for any masses.
pub fn separability_condition_separation(
    alpha: &ControlSchedule,
    beta: &ControlSchedule,
    cc: f64,
    window: (f64, f64),
    samples: usize,
    tol_cond: f64,
) -> Result<SeparationCondition> {
    if samples < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let model = SeparationModel {
        alpha: alpha.clone(),
        beta: beta.clone(),
        cc,
    };
    let mut ratio = Vec::with_capacity(samples);
    let mut bq5 = Vec::with_capacity(samples);
    let mut aq3 = Vec::with_capacity(samples);
    for t in uniform_times(window, samples) {
        let a = alpha.value(t)?;
        let b = beta.value(t)?;
        if a == 0.0 {
            return Err(Error::preset_domain(t, "alpha vanishes; the ratio beta^3/alpha^5 is undefined"));
        }
        let q0 = model.distance(t)?;
        ratio.push(b.powi(3) / a.powi(5));
        bq5.push(b * q0.powi(5));
        aq3.push(a * q0.powi(3));
    }
    let ratio_deviation = relative_spread(&ratio);
    Ok(SeparationCondition {
        holds: ratio_deviation < tol_cond,
        ratio_deviation,
        beta_q0_5_deviation: relative_spread(&bq5),
        alpha_q0_3_deviation: relative_spread(&aq3),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes;
    use approx::assert_abs_diff_eq;

    fn cfg(alpha: ControlSchedule, beta: ControlSchedule, m: (f64, f64)) -> SeparationConfig {
        SeparationConfig {
            alpha,
            beta,
            cc: 1.0,
            masses: MassPair::new(m.0, m.1).unwrap(),
        }
    }

    fn constant(a: f64, b: f64) -> QuadraticSystem {
        build_separation(&cfg(ControlSchedule::constant(a), ControlSchedule::constant(b), (1.0, 1.0))).unwrap()
    }

    #[test]
    fn worked_distances() {
        assert_abs_diff_eq!(constant(1.0, 0.0).equilibrium(0.0).unwrap()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            constant(0.0, 1.0).equilibrium(0.0).unwrap()[0],
            0.5 * 2f64.powf(0.2),
            epsilon = 1e-15
        );
        let q0 = 2.0 * constant(1.0, 1.0).equilibrium(0.0).unwrap()[0];
        assert!(q0 > 0.8 && q0 < 0.9);
    }

    #[test]
    fn no_root_is_a_domain_error() {
        let sys = constant(-1.0, 0.0);
        assert!(matches!(sys.equilibrium(0.0), Err(Error::PresetDomain { .. })));
        assert!(matches!(sys.stiffness(0.0), Err(Error::PresetDomain { .. })));
    }

    #[test]
    fn matches_transport_when_quartic_vanishes() {
        let k = ControlSchedule::smoothstep(0.0, 2.0, 1.0, 3.0).unwrap();
        let alpha = ControlSchedule::smoothstep(0.0, 2.0, 0.5, 1.5).unwrap();
        let sep = build_separation(&cfg(alpha, ControlSchedule::constant(0.0), (1.0, 2.0))).unwrap();
        let tr = super::super::build_transport(&super::super::TransportConfig {
            k,
            center: ControlSchedule::constant(0.0),
            cc: 1.0,
            masses: MassPair::new(1.0, 2.0).unwrap(),
        })
        .unwrap();
        for &t in &[0.0, 0.3, 1.0, 1.9] {
            let a = sep.stiffness(t).unwrap();
            let b = tr.stiffness(t).unwrap();
            assert_abs_diff_eq!(a.k, b.k, epsilon = 1e-12);
            assert_abs_diff_eq!(a.k1, b.k1, epsilon = 1e-12);
            assert_abs_diff_eq!(a.k2, b.k2, epsilon = 1e-12);
            for i in 0..2 {
                assert_abs_diff_eq!(sep.equilibrium(t).unwrap()[i], tr.equilibrium(t).unwrap()[i], epsilon = 1e-12);
                assert_abs_diff_eq!(
                    sep.equilibrium_rate(t).unwrap()[i],
                    tr.equilibrium_rate(t).unwrap()[i],
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn rates_agree_with_finite_differences() {
        let sys = build_separation(&cfg(
            ControlSchedule::linear_ramp(0.0, 1.0, 1.0, -0.5).unwrap(),
            ControlSchedule::smoothstep(0.0, 1.0, 0.2, 1.0).unwrap(),
            (1.0, 3.0),
        ))
        .unwrap();
        for &t in &[0.2, 0.5, 0.8] {
            assert!(crate::quadratic::equilibrium_rate_consistency(&sys, t).unwrap() < 1e-8);
            let h = 1e-6;
            let plus = sys.stiffness(t + h).unwrap();
            let minus = sys.stiffness(t - h).unwrap();
            let rate = sys.stiffness_rate(t).unwrap();
            assert_abs_diff_eq!(rate.k, (plus.k - minus.k) / (2.0 * h), epsilon = 1e-6);
            assert_abs_diff_eq!(rate.k1, (plus.k1 - minus.k1) / (2.0 * h), epsilon = 1e-6);
        }
    }

    #[test]
    fn equal_masses_keep_quarter_angle() {
        let sys = build_separation(&cfg(
            ControlSchedule::linear_ramp(0.0, 1.0, 1.0, -0.5).unwrap(),
            ControlSchedule::constant(0.7),
            (2.0, 2.0),
        ))
        .unwrap();
        for t in modes::uniform_times((0.0, 1.0), 20) {
            let dec = modes::decompose_at(&sys, t, None).unwrap();
            assert_abs_diff_eq!(dec.theta.abs(), std::f64::consts::FRAC_PI_4, epsilon = 1e-14);
        }
    }

    #[test]
    fn ratio_condition() {
        let alpha = ControlSchedule::linear_ramp(0.0, 1.0, 1.0, 2.0).unwrap();
        let beta = ControlSchedule::abs_power(alpha.clone(), 0.3, 5.0 / 3.0);
        let good = separability_condition_separation(&alpha, &beta, 1.0, (0.0, 1.0), 50, DEFAULT_TOL_COND).unwrap();
        assert!(good.holds, "{good:?}");
        assert!(good.beta_q0_5_deviation < 1e-9);
        assert!(good.alpha_q0_3_deviation < 1e-9);

        let bad = separability_condition_separation(
            &alpha,
            &ControlSchedule::constant(0.3),
            1.0,
            (0.0, 1.0),
            50,
            DEFAULT_TOL_COND,
        )
        .unwrap();
        assert!(!bad.holds);
    }

    #[test]
    fn ratio_condition_needs_nonzero_alpha() {
        let err = separability_condition_separation(
            &ControlSchedule::constant(0.0),
            &ControlSchedule::constant(1.0),
            1.0,
            (0.0, 1.0),
            5,
            DEFAULT_TOL_COND,
        );
        assert!(err.is_err());
    }
}
