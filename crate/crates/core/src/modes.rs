//! Dynamical normal modes.
//!
//! For a system with stiffness `K(t)` and masses `M`, the mass-weighted
//! stiffness `K̃ = M^{-1/2} K M^{-1/2}` is diagonalised by a rotation by
//! `θ(t)`. The modal matrix `A = 𝒪ᵀ M^{1/2}` maps lab displacements to
//! mode coordinates `Q = A (q − q⁽⁰⁾)`, momenta go as `P = A⁻ᵀ p`, and the
//! transformed Hamiltonian is
//!
//! ```text
//! H̃ = ½ Σ (Pᵢ² + Ωᵢ² Qᵢ²) − Pᵀ A q̇⁽⁰⁾ − θ̇ L_z,    L_z = Q₁P₂ − Q₂P₁.
//! ```
//!
//! The modes decouple exactly when θ̇ = 0.
//!
//! Mode labels follow θ continuously: the angle is unwrapped by multiples
//! of π/2 towards a caller-supplied reference instead of sorting the
//! squared frequencies, so a frequency crossing never shows up as a jump
//! in θ. Callers walking a time axis must thread the previous θ through
//! `branch_ref`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat2, Vec2, J};
use crate::quadratic::{Frame, MassPair, PhasePoint, QuadraticSystem, StiffnessTriple};
use crate::schedules::fd_step;

/// Relative threshold below which `K̃` counts as isotropic.
pub const DEGENERACY_EPS: f64 = 1e-12;

/// Default bound on `max |θ̇|` for a system to count as separable.
pub const DEFAULT_TOL_SEP: f64 = 1e-9;

/// `M^{-1/2} K M^{-1/2}`.
pub fn mass_weighted_stiffness(k: &Mat2, masses: MassPair) -> Mat2 {
    let (s1, s2) = (masses.m1().sqrt(), masses.m2().sqrt());
    let off = k.get(0, 1) / (s1 * s2);
    Mat2([
        [k.get(0, 0) / masses.m1(), off],
        [off, k.get(1, 1) / masses.m2()],
    ])
}

/// Numerator and denominator of `tan 2θ`, both divided by `m₁m₂`.
fn tan2theta_parts(kt: &Mat2) -> (f64, f64) {
    (-2.0 * kt.get(0, 1), kt.get(1, 1) - kt.get(0, 0))
}

fn is_degenerate(kt: &Mat2) -> bool {
    let (num, den) = tan2theta_parts(kt);
    let scale = DEGENERACY_EPS * kt.frobenius_norm();
    num.abs() <= scale && den.abs() <= scale
}

/// Rotation angle of the principal axes of `K̃`.
///
/// `2θ = atan2(2k√(m₁m₂), m₁(k+k₂) − m₂(k+k₁))`, moved by a multiple of
/// π/2 to the branch nearest `branch_ref`. Without a reference the result
/// lies in (−π/4, π/4], except that a vanishing denominator gives
/// `π/4·sign(numerator)`. An isotropic `K̃` has no preferred axes and
/// returns `branch_ref` (or 0).
pub fn theta_at(k: &Mat2, masses: MassPair, branch_ref: Option<f64>) -> f64 {
    let kt = mass_weighted_stiffness(k, masses);
    if is_degenerate(&kt) {
        return branch_ref.unwrap_or(0.0);
    }
    let (num, den) = tan2theta_parts(&kt);
    match branch_ref {
        Some(reference) => {
            let raw = 0.5 * num.atan2(den);
            raw + FRAC_PI_2 * ((reference - raw) / FRAC_PI_2).round()
        }
        None => {
            if den == 0.0 {
                return FRAC_PI_4 * num.signum();
            }
            let raw = 0.5 * num.atan2(den);
            if raw > FRAC_PI_4 {
                raw - FRAC_PI_2
            } else if raw <= -FRAC_PI_4 {
                raw + FRAC_PI_2
            } else {
                raw
            }
        }
    }
}

/// `(Ω₁², Ω₂²)` for the axes at angle `theta`. Either may be negative.
pub fn eigenfrequencies(k: &Mat2, masses: MassPair, theta: f64) -> (f64, f64) {
    let kt = mass_weighted_stiffness(k, masses);
    let (s, c) = theta.sin_cos();
    let (a, b, off) = (kt.get(0, 0), kt.get(1, 1), kt.get(0, 1));
    let sin2 = (2.0 * theta).sin();
    (
        a * c * c + b * s * s + off * sin2,
        a * s * s + b * c * c - off * sin2,
    )
}

/// Modal matrix `A = 𝒪ᵀ M^{1/2}` and its closed-form inverse `M^{-1/2} 𝒪`.
pub fn modal_matrix(theta: f64, masses: MassPair) -> (Mat2, Mat2) {
    let (s, c) = theta.sin_cos();
    let (s1, s2) = (masses.m1().sqrt(), masses.m2().sqrt());
    let a = Mat2([[s1 * c, s2 * s], [-s1 * s, s2 * c]]);
    let a_inv = Mat2([[c / s1, -s / s1], [s / s2, c / s2]]);
    (a, a_inv)
}

/// θ̇ from the chain rule on the `atan2` expression.
pub fn theta_dot_chain_rule(sys: &QuadraticSystem, t: f64) -> Result<f64> {
    let masses = sys.masses();
    let kt = mass_weighted_stiffness(&sys.stiffness_matrix_at(t)?, masses);
    if is_degenerate(&kt) {
        return Ok(0.0);
    }
    let rate = mass_weighted_stiffness(&sys.stiffness_rate(t)?.matrix(), masses);
    let (num, den) = tan2theta_parts(&kt);
    let (num_dot, den_dot) = tan2theta_parts(&rate);
    Ok(0.5 * (den * num_dot - num * den_dot) / (num * num + den * den))
}

/// θ̇ as a central difference of the continuity-tracked angle.
pub fn theta_dot_finite_difference(sys: &QuadraticSystem, t: f64) -> Result<f64> {
    let masses = sys.masses();
    let here = theta_at(&sys.stiffness_matrix_at(t)?, masses, None);
    let h = fd_step(t);
    let plus = theta_at(&sys.stiffness_matrix_at(t + h)?, masses, Some(here));
    let minus = theta_at(&sys.stiffness_matrix_at(t - h)?, masses, Some(here));
    Ok((plus - minus) / (2.0 * h))
}

/// θ̇ at `t`: the model's closed form if it has one, else the chain rule.
pub fn theta_dot_at(sys: &QuadraticSystem, t: f64) -> Result<f64> {
    match sys.coefficients().theta_rate(t) {
        Some(rate) => rate,
        None => theta_dot_chain_rule(sys, t),
    }
}

/// The normal-mode decomposition at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeDecomposition {
    pub t: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub omega1_sq: f64,
    pub omega2_sq: f64,
    pub a: Mat2,
    pub a_inv: Mat2,
    pub masses: MassPair,
    pub stiffness: StiffnessTriple,
    pub equilibrium: Vec2,
    pub equilibrium_rate: Vec2,
}

impl ModeDecomposition {
    pub fn omega_sq(&self) -> Vec2 {
        [self.omega1_sq, self.omega2_sq]
    }

    /// `A⁻ᵀ`, the momentum map.
    pub fn a_inv_t(&self) -> Mat2 {
        self.a_inv.transpose()
    }

    /// Linear-drive momentum `P₀ = A q̇⁽⁰⁾`.
    pub fn p0(&self) -> Vec2 {
        self.a.mul_vec(self.equilibrium_rate)
    }

    /// `Ȧ A⁻¹ = θ̇ J`.
    pub fn coupling(&self) -> Mat2 {
        J.scale(self.theta_dot)
    }

    /// The 4×4 matrix `W̃` of the transformed Hamiltonian, assembled from
    /// the blocks `A⁻ᵀKA⁻¹`, `ȦA⁻¹` and `AM⁻¹Aᵀ`.
    pub fn transformed_w(&self) -> [[f64; 4]; 4] {
        let k = self.stiffness.matrix();
        let pot = self.a_inv_t() * k * self.a_inv;
        let kin = self.a * self.masses.inverse_matrix() * self.a.transpose();
        let cpl = self.coupling();
        let cpl_t = cpl.transpose();
        let mut w = [[0.0; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                w[i][j] = pot.get(i, j);
                w[i][j + 2] = cpl_t.get(i, j);
                w[i + 2][j] = cpl.get(i, j);
                w[i + 2][j + 2] = kin.get(i, j);
            }
        }
        w
    }
}

/// Full decomposition at `t`, with θ on the branch nearest `branch_ref`.
pub fn decompose_at(
    sys: &QuadraticSystem,
    t: f64,
    branch_ref: Option<f64>,
) -> Result<ModeDecomposition> {
    let masses = sys.masses();
    let stiffness = sys.stiffness(t)?;
    let k = stiffness.matrix();
    let theta = theta_at(&k, masses, branch_ref);
    let (omega1_sq, omega2_sq) = eigenfrequencies(&k, masses, theta);
    let (a, a_inv) = modal_matrix(theta, masses);
    Ok(ModeDecomposition {
        t,
        theta,
        theta_dot: theta_dot_at(sys, t)?,
        omega1_sq,
        omega2_sq,
        a,
        a_inv,
        masses,
        stiffness,
        equilibrium: sys.equilibrium(t)?,
        equilibrium_rate: sys.equilibrium_rate(t)?,
    })
}

/// Decompositions along `times` with θ threaded for branch continuity.
pub fn decompose_series(sys: &QuadraticSystem, times: &[f64]) -> Result<Vec<ModeDecomposition>> {
    let mut out = Vec::with_capacity(times.len());
    let mut branch = None;
    for &t in times {
        let dec = decompose_at(sys, t, branch)?;
        branch = Some(dec.theta);
        out.push(dec);
    }
    Ok(out)
}

/// `n` uniformly spaced times covering `[t0, t1]`, endpoints included.
pub fn uniform_times(window: (f64, f64), n: usize) -> Vec<f64> {
    let (t0, t1) = window;
    if n < 2 {
        return vec![t0];
    }
    let step = (t1 - t0) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { t1 } else { t0 + step * i as f64 })
        .collect()
}

/// `Q = A (q − q⁽⁰⁾)`, `P = A⁻ᵀ p`.
pub fn to_mode_frame(dec: &ModeDecomposition, x: &PhasePoint) -> Result<PhasePoint> {
    x.expect_frame(Frame::Lab)?;
    let d = linalg::sub(x.q, dec.equilibrium);
    Ok(PhasePoint::mode(
        x.t,
        dec.a.mul_vec(d),
        dec.a_inv_t().mul_vec(x.p),
    ))
}

/// `q = q⁽⁰⁾ + A⁻¹ Q`, `p = Aᵀ P`.
pub fn from_mode_frame(dec: &ModeDecomposition, x: &PhasePoint) -> Result<PhasePoint> {
    x.expect_frame(Frame::Mode)?;
    Ok(PhasePoint::lab(
        x.t,
        linalg::add(dec.equilibrium, dec.a_inv.mul_vec(x.q)),
        dec.a.transpose().mul_vec(x.p),
    ))
}

/// `L_z = Q₁P₂ − Q₂P₁`.
pub fn angular_momentum(x: &PhasePoint) -> f64 {
    linalg::cross(x.q, x.p)
}

/// Value of the transformed Hamiltonian `H̃` at a mode-frame point.
pub fn effective_hamiltonian_value(dec: &ModeDecomposition, x: &PhasePoint) -> Result<f64> {
    x.expect_frame(Frame::Mode)?;
    let (q, p) = (x.q, x.p);
    let oscillators = 0.5
        * (p[0] * p[0] + p[1] * p[1] + dec.omega1_sq * q[0] * q[0] + dec.omega2_sq * q[1] * q[1]);
    Ok(oscillators - linalg::dot(p, dec.p0()) - dec.theta_dot * angular_momentum(x))
}

/// Magnetic (Larmor) contribution `½ω_L²(Q₁² + Q₂²) + ω_L L_z`.
pub fn larmor_energy(omega_l: f64, x: &PhasePoint) -> f64 {
    0.5 * omega_l * omega_l * linalg::dot(x.q, x.q) + omega_l * angular_momentum(x)
}

/// `Ṗ₀ = d/dt (A q̇⁽⁰⁾) = θ̇ J A q̇⁽⁰⁾ + A q̈⁽⁰⁾`.
pub fn p0_rate(dec: &ModeDecomposition, sys: &QuadraticSystem) -> Result<Vec2> {
    let accel = sys.equilibrium_accel(dec.t)?;
    let rotating = J.scale(dec.theta_dot).mul_vec(dec.p0());
    Ok(linalg::add(rotating, dec.a.mul_vec(accel)))
}

/// Result of the momentum shift `P′ = P − P₀`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentumShift {
    pub point: PhasePoint,
    pub p0: Vec2,
    pub p0_rate: Vec2,
    /// Centres `−Ṗ₀ᵢ/Ωᵢ²` of the displaced oscillators, when requested.
    pub centers: Option<Vec2>,
}

pub fn momentum_shift(
    dec: &ModeDecomposition,
    sys: &QuadraticSystem,
    x: &PhasePoint,
    with_centers: bool,
) -> Result<MomentumShift> {
    x.expect_frame(Frame::Mode)?;
    let p0 = dec.p0();
    let p0_rate = p0_rate(dec, sys)?;
    let centers = if with_centers {
        let omega = dec.omega_sq();
        let mut c = [0.0; 2];
        for i in 0..2 {
            if omega[i] == 0.0 {
                return Err(Error::ZeroFrequency { mode: i + 1 });
            }
            c[i] = -p0_rate[i] / omega[i];
        }
        Some(c)
    } else {
        None
    };
    Ok(MomentumShift {
        point: PhasePoint::mode(x.t, x.q, linalg::sub(x.p, p0)),
        p0,
        p0_rate,
        centers,
    })
}

/// Sufficient conditions for θ̇ = 0 that can be read off the stiffness.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AnalyticCase {
    /// `k = 0` with arbitrary `k₁(t)`, `k₂(t)`.
    ZeroCoupling,
    /// `k₁ = c₁k`, `k₂ = c₂k` with constant `c₁`, `c₂`.
    ProportionalStiffness { c1: f64, c2: f64 },
    /// `k₁ = k₂` with `m₁ = m₂`.
    EqualStiffnessEqualMass,
}

impl fmt::Display for AnalyticCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalyticCase::ZeroCoupling => f.write_str("k=0"),
            AnalyticCase::ProportionalStiffness { c1, c2 }
                if (c1 - 1.0).abs() <= 1e-12 && (c2 - 1.0).abs() <= 1e-12 =>
            {
                f.write_str("k1=k2=k")
            }
            AnalyticCase::ProportionalStiffness { .. } => f.write_str("k1=c1*k,k2=c2*k"),
            AnalyticCase::EqualStiffnessEqualMass => f.write_str("k1=k2,m1=m2"),
        }
    }
}

impl Serialize for AnalyticCase {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Which of the analytic sufficient conditions hold on every sample.
pub fn detect_analytic_case(masses: MassPair, samples: &[StiffnessTriple]) -> Option<AnalyticCase> {
    const TOL: f64 = 1e-12;
    if samples.is_empty() {
        return None;
    }
    let close = |a: f64, b: f64| (a - b).abs() <= TOL * (1.0 + a.abs().max(b.abs()));
    if samples.iter().all(|s| s.k == 0.0) {
        return Some(AnalyticCase::ZeroCoupling);
    }
    if samples.iter().all(|s| s.k != 0.0) {
        let c1 = samples[0].k1 / samples[0].k;
        let c2 = samples[0].k2 / samples[0].k;
        if samples
            .iter()
            .all(|s| close(s.k1 / s.k, c1) && close(s.k2 / s.k, c2))
        {
            return Some(AnalyticCase::ProportionalStiffness { c1, c2 });
        }
    }
    if masses.m1() == masses.m2() && samples.iter().all(|s| close(s.k1, s.k2)) {
        return Some(AnalyticCase::EqualStiffnessEqualMass);
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    BothStable,
    TransientlyUnstable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparabilityReport {
    pub window: (f64, f64),
    pub max_abs_theta_dot: f64,
    pub separable: bool,
    pub theta_samples: Vec<(f64, f64)>,
    pub stability: Stability,
    pub analytic_case: Option<AnalyticCase>,
}

/// Samples θ̇ over the window and decides whether the modes decouple.
pub fn classify_separability(
    sys: &QuadraticSystem,
    window: (f64, f64),
    n_samples: usize,
    tol_sep: f64,
) -> Result<SeparabilityReport> {
    if n_samples < 2 {
        return Err(Error::invalid("separability needs at least two samples"));
    }
    let times = uniform_times(window, n_samples);
    let decs = decompose_series(sys, &times)?;
    let max_abs_theta_dot = decs.iter().map(|d| d.theta_dot.abs()).fold(0.0, f64::max);
    let stable = decs.iter().all(|d| d.omega1_sq > 0.0 && d.omega2_sq > 0.0);
    let stiffness: Vec<StiffnessTriple> = decs.iter().map(|d| d.stiffness).collect();
    Ok(SeparabilityReport {
        window,
        max_abs_theta_dot,
        separable: max_abs_theta_dot <= tol_sep,
        theta_samples: decs.iter().map(|d| (d.t, d.theta)).collect(),
        stability: if stable {
            Stability::BothStable
        } else {
            Stability::TransientlyUnstable
        },
        analytic_case: detect_analytic_case(sys.masses(), &stiffness),
    })
}

/// Iso-potential ellipse of the mass-weighted stiffness.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipseGeometry {
    pub center: Vec2,
    pub orientation: f64,
    /// `Ωᵢ⁻¹`; `None` where `Ωᵢ² ≤ 0` and the axis is not bounded.
    pub radii: [Option<f64>; 2],
}

impl EllipseGeometry {
    pub fn is_bounded(&self) -> bool {
        self.radii.iter().all(Option::is_some)
    }
}

pub fn ellipse_at(dec: &ModeDecomposition) -> EllipseGeometry {
    let radius = |w2: f64| (w2 > 0.0).then(|| 1.0 / w2.sqrt());
    EllipseGeometry {
        center: dec.equilibrium,
        orientation: dec.theta,
        radii: [radius(dec.omega1_sq), radius(dec.omega2_sq)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadratic::ScheduledCoefficients;
    use crate::schedules::ControlSchedule;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn masses(m1: f64, m2: f64) -> MassPair {
        MassPair::new(m1, m2).unwrap()
    }

    fn k_mat(k: f64, k1: f64, k2: f64) -> Mat2 {
        StiffnessTriple::new(k, k1, k2).matrix()
    }

    fn scheduled(m: MassPair, k: ControlSchedule, k1: ControlSchedule, k2: ControlSchedule) -> QuadraticSystem {
        QuadraticSystem::new(
            m,
            Arc::new(ScheduledCoefficients {
                k,
                k1,
                k2,
                q1_eq: ControlSchedule::constant(0.0),
                q2_eq: ControlSchedule::constant(0.0),
            }),
        )
    }

    /// Eigenvalues of a symmetric 2×2 matrix from its characteristic
    /// polynomial, ascending.
    fn char_poly_eigs(m: &Mat2) -> (f64, f64) {
        let tr = m.trace();
        let det = m.det();
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        (tr / 2.0 - disc, tr / 2.0 + disc)
    }

    #[test]
    fn mass_weighting_examples() {
        let k = k_mat(1.0, 1.0, 1.0);
        assert_eq!(mass_weighted_stiffness(&k, masses(1.0, 1.0)), k);
        let kt = mass_weighted_stiffness(&k, masses(4.0, 1.0));
        assert!(kt.max_abs_diff(&Mat2::new(0.5, -0.5, -0.5, 2.0)) < 1e-15);
        let kt0 = mass_weighted_stiffness(&k_mat(0.0, 3.0, 5.0), masses(2.0, 0.5));
        assert!(kt0.max_abs_diff(&Mat2::diag(1.5, 10.0)) < 1e-15);
    }

    #[test]
    fn theta_examples() {
        assert_abs_diff_eq!(theta_at(&k_mat(1.0, 2.0, 2.0), masses(3.0, 3.0), None), FRAC_PI_4);
        assert_eq!(theta_at(&k_mat(0.0, 1.0, 2.0), masses(1.0, 1.0), None), 0.0);
        assert_eq!(theta_at(&k_mat(-1.0, 2.0, 2.0), masses(1.0, 1.0), None), -FRAC_PI_4);

        // Jacobi-rotation oracle on K̃ = [[0.5,-0.5],[-0.5,2]]: the angle that
        // zeroes the off-diagonal of 𝒪ᵀK̃𝒪 satisfies tan 2θ = 2·0.5/(2-0.5).
        let theta = theta_at(&k_mat(1.0, 1.0, 1.0), masses(4.0, 1.0), None);
        let oracle = 0.5 * (1.0f64 / 1.5).atan();
        assert_abs_diff_eq!(theta, oracle, epsilon = 1e-15);
        assert_abs_diff_eq!(theta, 0.5 * 4.0f64.atan2(6.0), epsilon = 1e-15);
        let o = Mat2::rotation(theta);
        let kt = mass_weighted_stiffness(&k_mat(1.0, 1.0, 1.0), masses(4.0, 1.0));
        assert!((o.transpose() * kt * o).get(0, 1).abs() < 1e-15);
    }

    #[test]
    fn theta_degenerate_uses_branch_reference() {
        let iso = Mat2::diag(2.0, 2.0);
        assert_eq!(theta_at(&iso, masses(1.0, 1.0), None), 0.0);
        assert_eq!(theta_at(&iso, masses(1.0, 1.0), Some(0.3)), 0.3);
    }

    #[test]
    fn theta_branch_tracking() {
        let k = k_mat(1.0, 1.0, 1.0);
        let m = masses(4.0, 1.0);
        let base = theta_at(&k, m, None);
        let shifted = theta_at(&k, m, Some(base + 1.5));
        assert_abs_diff_eq!(shifted, base + FRAC_PI_2, epsilon = 1e-15);
        // the shifted branch swaps the labels of the two frequencies
        let (w1, w2) = eigenfrequencies(&k, m, base);
        let (v1, v2) = eigenfrequencies(&k, m, shifted);
        assert_abs_diff_eq!(w1, v2, epsilon = 1e-14);
        assert_abs_diff_eq!(w2, v1, epsilon = 1e-14);
    }

    #[test]
    fn eigenfrequency_examples() {
        let k = k_mat(1.0, 1.0, 1.0);
        let (w1, w2) = eigenfrequencies(&k, masses(1.0, 1.0), FRAC_PI_4);
        let (lo, hi) = char_poly_eigs(&k);
        assert_abs_diff_eq!(w1, lo, epsilon = 1e-15);
        assert_abs_diff_eq!(w2, hi, epsilon = 1e-15);
        assert_abs_diff_eq!(w1, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w2, 3.0, epsilon = 1e-15);
        assert_eq!(eigenfrequencies(&k_mat(0.0, 3.0, 5.0), masses(2.0, 0.5), 0.0), (1.5, 10.0));
    }

    #[test]
    fn modal_matrix_examples() {
        let (a, a_inv) = modal_matrix(0.0, masses(4.0, 9.0));
        assert_eq!(a, Mat2::diag(2.0, 3.0));
        assert!((a * a_inv).max_abs_diff(&Mat2::IDENTITY) < 1e-15);
        let (a, _) = modal_matrix(FRAC_PI_4, masses(1.0, 1.0));
        let h = 0.5f64.sqrt();
        assert!(a.max_abs_diff(&Mat2::new(h, h, -h, h)) < 1e-15);
    }

    #[test]
    fn mode_frame_examples() {
        let sys = scheduled(
            masses(1.0, 1.0),
            ControlSchedule::constant(1.0),
            ControlSchedule::constant(1.0),
            ControlSchedule::constant(1.0),
        );
        let dec = decompose_at(&sys, 0.0, None).unwrap();
        assert_abs_diff_eq!(dec.theta, FRAC_PI_4);
        let rest = to_mode_frame(&dec, &PhasePoint::lab(0.0, [0.0, 0.0], [0.0, 0.0])).unwrap();
        assert_eq!(rest.state(), [0.0; 4]);

        // A(π/4)·(1,−1) = (√½ − √½, −√½ − √½) = (0, −√2)
        let x = PhasePoint::lab(0.0, [1.0, -1.0], [0.0, 0.0]);
        let mode = to_mode_frame(&dec, &x).unwrap();
        assert_abs_diff_eq!(mode.q[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mode.q[1], -std::f64::consts::SQRT_2, epsilon = 1e-15);
        let back = from_mode_frame(&dec, &mode).unwrap();
        assert_abs_diff_eq!(back.q[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(back.q[1], -1.0, epsilon = 1e-15);

        // from_mode_frame(0, −√2) recovers (1, −1)
        let lab = from_mode_frame(&dec, &PhasePoint::mode(0.0, [0.0, -std::f64::consts::SQRT_2], [0.0, 0.0])).unwrap();
        assert_abs_diff_eq!(lab.q[0], 1.0, epsilon = 1e-15);
        assert!(to_mode_frame(&dec, &mode).is_err());
    }

    #[test]
    fn effective_hamiltonian_matches_lab_for_static_system() {
        let sys = scheduled(
            masses(2.0, 0.7),
            ControlSchedule::constant(0.8),
            ControlSchedule::constant(1.3),
            ControlSchedule::constant(-0.2),
        );
        let dec = decompose_at(&sys, 0.0, None).unwrap();
        assert_eq!(dec.theta_dot, 0.0);
        let x = PhasePoint::lab(0.0, [0.4, -1.1], [0.3, 0.9]);
        let h = sys.hamiltonian_value(&x).unwrap();
        let ht = effective_hamiltonian_value(&dec, &to_mode_frame(&dec, &x).unwrap()).unwrap();
        assert_abs_diff_eq!(h, ht, epsilon = 1e-14);
        assert_eq!(effective_hamiltonian_value(&dec, &PhasePoint::mode(0.0, [0.0; 2], [0.0; 2])).unwrap(), 0.0);
    }

    #[test]
    fn momentum_shift_static_and_zero_frequency() {
        let sys = scheduled(
            masses(1.0, 1.0),
            ControlSchedule::constant(0.0),
            ControlSchedule::constant(0.0),
            ControlSchedule::constant(2.0),
        );
        let dec = decompose_at(&sys, 0.0, None).unwrap();
        let x = PhasePoint::mode(0.0, [0.1, 0.2], [0.3, 0.4]);
        let shift = momentum_shift(&dec, &sys, &x, false).unwrap();
        assert_eq!(shift.p0, [0.0, 0.0]);
        assert_eq!(shift.point, x);
        assert_eq!(dec.omega1_sq, 0.0);
        assert!(matches!(
            momentum_shift(&dec, &sys, &x, true),
            Err(Error::ZeroFrequency { mode: 1 })
        ));
    }

    #[test]
    fn ellipse_flags_unbounded_axis() {
        let sys = scheduled(
            masses(1.0, 1.0),
            ControlSchedule::constant(0.0),
            ControlSchedule::constant(-1.0),
            ControlSchedule::constant(4.0),
        );
        let e = ellipse_at(&decompose_at(&sys, 0.0, None).unwrap());
        assert_eq!(e.radii, [None, Some(0.5)]);
        assert!(!e.is_bounded());

        let iso = scheduled(
            masses(1.0, 1.0),
            ControlSchedule::constant(0.0),
            ControlSchedule::constant(4.0),
            ControlSchedule::constant(4.0),
        );
        let e = ellipse_at(&decompose_at(&iso, 0.0, None).unwrap());
        assert_eq!(e.orientation, 0.0);
        assert_eq!(e.radii, [Some(0.5), Some(0.5)]);
    }

    #[test]
    fn chain_rule_matches_finite_difference() {
        let sys = scheduled(
            masses(1.7, 0.6),
            ControlSchedule::smoothstep(0.0, 4.0, 0.5, 2.0).unwrap(),
            ControlSchedule::polynomial(vec![1.0, 0.3, -0.02]),
            ControlSchedule::constant(0.8),
        );
        for &t in &[0.5, 1.3, 2.0, 3.7] {
            let analytic = theta_dot_chain_rule(&sys, t).unwrap();
            let fd = theta_dot_finite_difference(&sys, t).unwrap();
            assert!((analytic - fd).abs() < 1e-6, "t={t}: {analytic} vs {fd}");
            assert!(analytic.abs() > 1e-4);
        }
    }

    #[test]
    fn modal_matrix_derivative_is_rotation_generator() {
        let m = masses(2.5, 0.4);
        let (theta, theta_dot) = (0.37, 1.3);
        let h = 1e-5;
        let (a_plus, _) = modal_matrix(theta + theta_dot * h, m);
        let (a_minus, _) = modal_matrix(theta - theta_dot * h, m);
        let (_, a_inv) = modal_matrix(theta, m);
        let a_dot = (a_plus - a_minus).scale(1.0 / (2.0 * h));
        let coupling = a_dot * a_inv;
        assert!(coupling.max_abs_diff(&J.scale(theta_dot)) < 1e-9);
    }

    #[test]
    fn analytic_case_detection() {
        let m = masses(1.0, 2.0);
        let s = |k, k1, k2| StiffnessTriple::new(k, k1, k2);
        assert_eq!(detect_analytic_case(m, &[s(0.0, 1.0, 2.0), s(0.0, 3.0, 1.0)]), Some(AnalyticCase::ZeroCoupling));
        let prop = detect_analytic_case(m, &[s(1.0, 1.0, 1.0), s(2.0, 2.0, 2.0)]).unwrap();
        assert_eq!(prop.to_string(), "k1=k2=k");
        let prop = detect_analytic_case(m, &[s(1.0, 2.0, 3.0), s(2.0, 4.0, 6.0)]).unwrap();
        assert_eq!(prop.to_string(), "k1=c1*k,k2=c2*k");
        assert_eq!(detect_analytic_case(m, &[s(1.0, 2.0, 2.0), s(2.0, 3.0, 3.0)]), None);
        let eq = masses(1.5, 1.5);
        assert_eq!(
            detect_analytic_case(eq, &[s(1.0, 2.0, 2.0), s(2.0, 3.0, 3.0)]),
            Some(AnalyticCase::EqualStiffnessEqualMass)
        );
    }

    #[test]
    fn k_zero_system_is_separable() {
        let sys = scheduled(
            masses(1.0, 3.0),
            ControlSchedule::constant(0.0),
            ControlSchedule::smoothstep(0.0, 1.0, 1.0, 4.0).unwrap(),
            ControlSchedule::smoothstep(0.0, 1.0, 4.0, 1.0).unwrap(),
        );
        let report = classify_separability(&sys, (0.0, 1.0), 50, DEFAULT_TOL_SEP).unwrap();
        assert!(report.separable);
        assert_eq!(report.max_abs_theta_dot, 0.0);
        assert_eq!(report.stability, Stability::BothStable);
        assert_eq!(report.analytic_case, Some(AnalyticCase::ZeroCoupling));
        assert!(classify_separability(&sys, (0.0, 1.0), 1, DEFAULT_TOL_SEP).is_err());
    }

    #[test]
    fn theta_dot_zero_means_no_lz_contribution() {
        let sys = scheduled(
            masses(1.0, 3.0),
            ControlSchedule::smoothstep(0.0, 1.0, 1.0, 2.0).unwrap(),
            ControlSchedule::smoothstep(0.0, 1.0, 2.0, 4.0).unwrap(),
            ControlSchedule::smoothstep(0.0, 1.0, 0.5, 1.0).unwrap(),
        );
        let dec = decompose_at(&sys, 0.4, None).unwrap();
        assert!(dec.theta_dot.abs() < 1e-15);
        let x = PhasePoint::mode(0.4, [0.3, -0.5], [1.1, 0.2]);
        let no_lz = 0.5 * (x.p[0].powi(2) + x.p[1].powi(2) + dec.omega1_sq * x.q[0].powi(2) + dec.omega2_sq * x.q[1].powi(2));
        assert!((effective_hamiltonian_value(&dec, &x).unwrap() - no_lz).abs() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn simultaneous_diagonalization(
            k in -5.0..5.0f64, k1 in -5.0..5.0f64, k2 in -5.0..5.0f64,
            m1 in 0.1..10.0f64, m2 in 0.1..10.0f64,
        ) {
            let m = masses(m1, m2);
            let km = k_mat(k, k1, k2);
            let theta = theta_at(&km, m, None);
            prop_assert!(theta > -FRAC_PI_4 - 1e-15 && theta <= FRAC_PI_4 + 1e-15);
            let (w1, w2) = eigenfrequencies(&km, m, theta);
            let (a, a_inv) = modal_matrix(theta, m);
            prop_assert!((a * a_inv).max_abs_diff(&Mat2::IDENTITY) < 1e-12);
            let diag = a_inv.transpose() * km * a_inv;
            let kt = mass_weighted_stiffness(&km, m);
            let scale = kt.frobenius_norm();
            prop_assert!(diag.get(0, 1).abs() <= 1e-10 * scale);
            prop_assert!((diag.get(0, 0) - w1).abs() <= 1e-10 * scale);
            prop_assert!((diag.get(1, 1) - w2).abs() <= 1e-10 * scale);
            let unit = a * m.inverse_matrix() * a.transpose();
            prop_assert!(unit.max_abs_diff(&Mat2::IDENTITY) < 1e-12);
            prop_assert!((a.det() - (m1 * m2).sqrt()).abs() <= 1e-12 * (m1 * m2).sqrt());
            prop_assert!((w1 + w2 - kt.trace()).abs() <= 1e-10 * scale);
            prop_assert!((w1 * w2 - kt.det()).abs() <= 1e-10 * scale * scale);
        }

        #[test]
        fn frame_round_trip(
            theta in -3.0..3.0f64, m1 in 0.1..10.0f64, m2 in 0.1..10.0f64,
            q in prop::array::uniform2(-5.0..5.0f64), p in prop::array::uniform2(-5.0..5.0f64),
        ) {
            let m = masses(m1, m2);
            let (a, a_inv) = modal_matrix(theta, m);
            let dec = ModeDecomposition {
                t: 0.0, theta, theta_dot: 0.0, omega1_sq: 1.0, omega2_sq: 1.0, a, a_inv,
                masses: m, stiffness: StiffnessTriple::default(),
                equilibrium: [0.3, -0.4], equilibrium_rate: [0.0, 0.0],
            };
            let x = PhasePoint::lab(0.0, q, p);
            let back = from_mode_frame(&dec, &to_mode_frame(&dec, &x).unwrap()).unwrap();
            for (u, v) in back.state().iter().zip(x.state().iter()) {
                prop_assert!((u - v).abs() <= 1e-12 * (1.0 + v.abs()));
            }
        }
    }
}
