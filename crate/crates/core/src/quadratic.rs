//! Harmonically approximated two-degree-of-freedom systems.
//!
//! A [`QuadraticSystem`] is
//!
//! ```text
//! H = p₁²/2m₁ + p₂²/2m₂ + ½ (q − q⁽⁰⁾(t))ᵀ K(t) (q − q⁽⁰⁾(t)),
//! K = [[k + k₁, −k], [−k, k + k₂]]
//! ```
//!
//! Terms of H that depend on time only are dropped; they shift the energy
//! by a time-dependent offset and do not affect the motion.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat2, Vec2};
use crate::schedules::{central_difference, fd_step, ControlSchedule};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct MassPair {
    m1: f64,
    m2: f64,
}

impl MassPair {
    pub fn new(m1: f64, m2: f64) -> Result<Self> {
        if !(m1.is_finite() && m2.is_finite() && m1 > 0.0 && m2 > 0.0) {
            return Err(Error::invalid(format!(
                "masses must be positive and finite, got ({m1}, {m2})"
            )));
        }
        Ok(MassPair { m1, m2 })
    }

    pub fn equal(m: f64) -> Result<Self> {
        Self::new(m, m)
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.m1, self.m2]
    }

    pub fn matrix(&self) -> Mat2 {
        Mat2::diag(self.m1, self.m2)
    }

    pub fn inverse_matrix(&self) -> Mat2 {
        Mat2::diag(1.0 / self.m1, 1.0 / self.m2)
    }
}

impl TryFrom<[f64; 2]> for MassPair {
    type Error = Error;

    fn try_from(m: [f64; 2]) -> Result<Self> {
        MassPair::new(m[0], m[1])
    }
}

impl From<MassPair> for [f64; 2] {
    fn from(m: MassPair) -> Self {
        m.as_array()
    }
}

/// The three parameters of the stiffness matrix at one instant.
/// Any of them may be negative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StiffnessTriple {
    pub k: f64,
    pub k1: f64,
    pub k2: f64,
}

impl StiffnessTriple {
    pub fn new(k: f64, k1: f64, k2: f64) -> Self {
        StiffnessTriple { k, k1, k2 }
    }

    /// `[[k + k₁, −k], [−k, k + k₂]]`. The off-diagonal entries are the
    /// same float, so the result is exactly symmetric.
    pub fn matrix(&self) -> Mat2 {
        let off = -self.k;
        Mat2([[self.k + self.k1, off], [off, self.k + self.k2]])
    }

    pub fn is_finite(&self) -> bool {
        self.k.is_finite() && self.k1.is_finite() && self.k2.is_finite()
    }
}

/// Time-dependent coefficients of a quadratic system.
///
/// Implementors supply the stiffness triple, the equilibrium trajectory
/// and their time derivatives. Optional hooks let presets with closed
/// forms report them directly.
pub trait Coefficients: Send + Sync + fmt::Debug {
    fn stiffness(&self, t: f64) -> Result<StiffnessTriple>;

    fn stiffness_rate(&self, t: f64) -> Result<StiffnessTriple>;

    fn equilibrium(&self, t: f64) -> Result<Vec2>;

    fn equilibrium_rate(&self, t: f64) -> Result<Vec2>;

    /// Second time derivative of the equilibrium. Defaults to a central
    /// difference of [`Coefficients::equilibrium_rate`].
    fn equilibrium_accel(&self, t: f64) -> Result<Vec2> {
        let h = fd_step(t);
        let plus = self.equilibrium_rate(t + h)?;
        let minus = self.equilibrium_rate(t - h)?;
        Ok([
            (plus[0] - minus[0]) / (2.0 * h),
            (plus[1] - minus[1]) / (2.0 * h),
        ])
    }

    /// Closed-form θ̇, when the model knows it.
    fn theta_rate(&self, _t: f64) -> Option<Result<f64>> {
        None
    }

    /// The potential before harmonic truncation, when the model has one.
    fn full_potential(&self, _t: f64, _q: Vec2) -> Option<Result<f64>> {
        None
    }
}

/// Masses plus time-dependent stiffness and equilibrium.
#[derive(Clone, Debug)]
pub struct QuadraticSystem {
    masses: MassPair,
    coefficients: Arc<dyn Coefficients>,
}

impl QuadraticSystem {
    pub fn new(masses: MassPair, coefficients: Arc<dyn Coefficients>) -> Self {
        QuadraticSystem {
            masses,
            coefficients,
        }
    }

    pub fn masses(&self) -> MassPair {
        self.masses
    }

    pub fn coefficients(&self) -> &dyn Coefficients {
        self.coefficients.as_ref()
    }

    pub fn stiffness(&self, t: f64) -> Result<StiffnessTriple> {
        let s = self.coefficients.stiffness(t)?;
        if !s.is_finite() {
            return Err(Error::preset_domain(t, "stiffness is not finite"));
        }
        Ok(s)
    }

    pub fn stiffness_rate(&self, t: f64) -> Result<StiffnessTriple> {
        self.coefficients.stiffness_rate(t)
    }

    pub fn stiffness_matrix_at(&self, t: f64) -> Result<Mat2> {
        Ok(self.stiffness(t)?.matrix())
    }

    pub fn equilibrium(&self, t: f64) -> Result<Vec2> {
        self.coefficients.equilibrium(t)
    }

    pub fn equilibrium_rate(&self, t: f64) -> Result<Vec2> {
        self.coefficients.equilibrium_rate(t)
    }

    pub fn equilibrium_accel(&self, t: f64) -> Result<Vec2> {
        self.coefficients.equilibrium_accel(t)
    }

    pub fn full_potential(&self, t: f64, q: Vec2) -> Option<Result<f64>> {
        self.coefficients.full_potential(t, q)
    }

    /// Lab-frame value of the harmonic Hamiltonian.
    pub fn hamiltonian_value(&self, x: &PhasePoint) -> Result<f64> {
        x.expect_frame(Frame::Lab)?;
        let k = self.stiffness_matrix_at(x.t)?;
        let d = linalg::sub(x.q, self.equilibrium(x.t)?);
        let kinetic = x.p[0] * x.p[0] / (2.0 * self.masses.m1) + x.p[1] * x.p[1] / (2.0 * self.masses.m2);
        Ok(kinetic + 0.5 * k.quadratic_form(d))
    }

    /// `−K(t)(q − q⁽⁰⁾(t))`.
    pub fn force_at(&self, x: &PhasePoint) -> Result<Vec2> {
        x.expect_frame(Frame::Lab)?;
        let k = self.stiffness_matrix_at(x.t)?;
        let d = linalg::sub(x.q, self.equilibrium(x.t)?);
        let f = k.mul_vec(d);
        Ok([-f[0], -f[1]])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Lab,
    Mode,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frame::Lab => "lab",
            Frame::Mode => "mode",
        })
    }
}

/// A point in phase space. In the lab frame `q` holds absolute positions;
/// in the mode frame it holds the normal-mode coordinates `Q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint {
    pub t: f64,
    pub q: Vec2,
    pub p: Vec2,
    pub frame: Frame,
}

impl PhasePoint {
    pub fn lab(t: f64, q: Vec2, p: Vec2) -> Self {
        PhasePoint {
            t,
            q,
            p,
            frame: Frame::Lab,
        }
    }

    pub fn mode(t: f64, q: Vec2, p: Vec2) -> Self {
        PhasePoint {
            t,
            q,
            p,
            frame: Frame::Mode,
        }
    }

    pub fn state(&self) -> [f64; 4] {
        [self.q[0], self.q[1], self.p[0], self.p[1]]
    }

    pub fn from_state(t: f64, s: [f64; 4], frame: Frame) -> Self {
        PhasePoint {
            t,
            q: [s[0], s[1]],
            p: [s[2], s[3]],
            frame,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.state().iter().all(|x| x.is_finite())
    }

    pub(crate) fn expect_frame(&self, expected: Frame) -> Result<()> {
        if self.frame != expected {
            return Err(Error::FrameMismatch {
                expected,
                found: self.frame,
            });
        }
        Ok(())
    }
}

/// A system assembled directly from five schedules.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledCoefficients {
    pub k: ControlSchedule,
    pub k1: ControlSchedule,
    pub k2: ControlSchedule,
    pub q1_eq: ControlSchedule,
    pub q2_eq: ControlSchedule,
}

impl Coefficients for ScheduledCoefficients {
    fn stiffness(&self, t: f64) -> Result<StiffnessTriple> {
        Ok(StiffnessTriple::new(
            self.k.value(t)?,
            self.k1.value(t)?,
            self.k2.value(t)?,
        ))
    }

    fn stiffness_rate(&self, t: f64) -> Result<StiffnessTriple> {
        Ok(StiffnessTriple::new(
            self.k.derivative(t)?,
            self.k1.derivative(t)?,
            self.k2.derivative(t)?,
        ))
    }

    fn equilibrium(&self, t: f64) -> Result<Vec2> {
        Ok([self.q1_eq.value(t)?, self.q2_eq.value(t)?])
    }

    fn equilibrium_rate(&self, t: f64) -> Result<Vec2> {
        Ok([self.q1_eq.derivative(t)?, self.q2_eq.derivative(t)?])
    }

    fn equilibrium_accel(&self, t: f64) -> Result<Vec2> {
        Ok([
            self.q1_eq.second_derivative(t)?,
            self.q2_eq.second_derivative(t)?,
        ])
    }
}

/// Largest relative mismatch between the equilibrium rate and a central
/// difference of the equilibrium at `t`.
pub fn equilibrium_rate_consistency(sys: &QuadraticSystem, t: f64) -> Result<f64> {
    let rate = sys.equilibrium_rate(t)?;
    let mut worst = 0.0f64;
    for i in 0..2 {
        let fd = central_difference(|s| Ok(sys.equilibrium(s)?[i]), t)?;
        worst = worst.max((fd - rate[i]).abs() / (1.0 + rate[i].abs()));
    }
    Ok(worst)
}
