//! Real positive roots of the equilibrium-distance polynomials.
//!
//! The ion-separation preset needs the positive root of
//! `βq⁵ + 2αq³ − 2C = 0`, the phase-gate preset the positive root of
//! `k₀q³ + (F₁ − F₂)q² − 2C = 0`. Both are found by bracketing, bisection
//! and Newton refinement kept inside the bracket.

use crate::error::{Error, Result};

const MAX_ITER: usize = 400;
const BRACKET_EPS: f64 = 1e-12;
const MAX_DOUBLINGS: usize = 200;
/// Number of sub-intervals scanned for sign changes.
const SCAN_CELLS: usize = 512;

/// Polynomial with coefficients listed lowest order first.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    coefficients: Vec<f64>,
}

impl Polynomial {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Polynomial { coefficients }
    }

    /// `βq⁵ + 2αq³ − 2C`.
    pub fn separation_quintic(alpha: f64, beta: f64, cc: f64) -> Self {
        Polynomial::new(vec![-2.0 * cc, 0.0, 0.0, 2.0 * alpha, 0.0, beta])
    }

    /// `k₀q³ + (F₁ − F₂)q² − 2C`.
    pub fn phase_gate_cubic(k0: f64, force_difference: f64, cc: f64) -> Self {
        Polynomial::new(vec![-2.0 * cc, 0.0, force_difference, k0])
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Value and first derivative.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let (mut v, mut d) = (0.0, 0.0);
        for &c in self.coefficients.iter().rev() {
            d = d * x + v;
            v = v * x + c;
        }
        (v, d)
    }
}

/// Root of `f` inside `[lo, hi]`, where `f(lo)` and `f(hi)` have opposite
/// signs. Newton steps are taken when they stay inside the current
/// bracket, bisection otherwise.
pub fn bracketed_newton<F>(f: F, mut lo: f64, mut hi: f64) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let (mut f_lo, _) = f(lo);
    let (f_hi, _) = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::invalid(format!(
            "no sign change on [{lo}, {hi}]: f = ({f_lo}, {f_hi})"
        )));
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == f_lo.signum() {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * next.abs() || hi - lo <= 2.0 * f64::EPSILON * hi.abs() {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// All positive roots of `p` on `(0, q_max]`, growing `q_max` until the
/// polynomial is positive there (the leading coefficient must be
/// positive for that to happen).
pub fn positive_roots(p: &Polynomial, q_max: f64) -> Result<Vec<f64>> {
    let mut upper = q_max;
    for _ in 0..MAX_DOUBLINGS {
        if p.eval(upper).0 > 0.0 {
            break;
        }
        upper *= 2.0;
    }
    let (f0, _) = p.eval(0.0);
    let (f_upper, _) = p.eval(upper);
    if descartes_sign_changes(p) == 1 && f0 < 0.0 && f_upper > 0.0 {
        // exactly one positive root, already bracketed
        return Ok(vec![bracketed_newton(|x| p.eval(x), 0.0, upper)?]);
    }
    scan_fixed(p, upper)
}

fn descartes_sign_changes(p: &Polynomial) -> usize {
    let signs: Vec<f64> = p
        .coefficients
        .iter()
        .filter(|c| **c != 0.0)
        .map(|c| c.signum())
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// The positive root nearest `hint`, or the smallest one without a hint.
pub fn select_root(roots: &[f64], hint: Option<f64>) -> Option<f64> {
    match hint {
        Some(h) => roots
            .iter()
            .copied()
            .min_by(|a, b| (a - h).abs().total_cmp(&(b - h).abs())),
        None => roots.first().copied(),
    }
}

fn initial_q_max(alpha: f64, beta: f64, cc: f64) -> f64 {
    let a = (2.0 * cc / f64::max((2.0 * alpha).abs(), BRACKET_EPS)).cbrt();
    let b = (2.0 * cc / f64::max(beta, BRACKET_EPS)).powf(0.2);
    10.0 * f64::max(1.0, f64::max(a, b))
}

/// Equilibrium distance for the separation potential.
pub fn solve_separation_quintic(alpha: f64, beta: f64, cc: f64, hint: Option<f64>) -> Result<f64> {
    if !(alpha.is_finite() && beta.is_finite() && cc.is_finite() && cc > 0.0) {
        return Err(Error::invalid("quintic coefficients must be finite with C > 0"));
    }
    let p = Polynomial::separation_quintic(alpha, beta, cc);
    let roots = if beta < 0.0 {
        // leading coefficient negative: the polynomial never turns positive
        // far out, so scan only the default bracket
        scan_fixed(&p, initial_q_max(alpha, beta.abs(), cc))?
    } else {
        positive_roots(&p, initial_q_max(alpha, beta, cc))?
    };
    select_root(&roots, hint).ok_or_else(|| {
        Error::invalid(format!(
            "no positive root of {beta}q^5 + {}q^3 - {}",
            2.0 * alpha,
            2.0 * cc
        ))
    })
}

/// Sign-change scan of `(0, upper]` on a geometric grid, which resolves
/// roots near zero as well as near `upper`.
fn scan_fixed(p: &Polynomial, upper: f64) -> Result<Vec<f64>> {
    let lower = BRACKET_EPS * upper.min(1.0);
    let ratio = (upper / lower).powf(1.0 / SCAN_CELLS as f64);
    let mut roots = Vec::new();
    let mut a = lower;
    let mut fa = p.eval(a).0;
    for i in 1..=SCAN_CELLS {
        let b = if i == SCAN_CELLS { upper } else { lower * ratio.powi(i as i32) };
        let fb = p.eval(b).0;
        if fb == 0.0 {
            roots.push(b);
        } else if fa != 0.0 && fa.signum() != fb.signum() {
            roots.push(bracketed_newton(|x| p.eval(x), a, b)?);
        }
        a = b;
        fa = fb;
    }
    Ok(roots)
}

/// Ion separation for the phase-gate potential.
pub fn solve_phase_gate_cubic(k0: f64, force_difference: f64, cc: f64, hint: Option<f64>) -> Result<f64> {
    if !(k0.is_finite() && k0 > 0.0 && force_difference.is_finite() && cc.is_finite() && cc > 0.0) {
        return Err(Error::invalid("cubic needs finite coefficients with k0 > 0 and C > 0"));
    }
    let p = Polynomial::phase_gate_cubic(k0, force_difference, cc);
    let q_max = 10.0 * f64::max(1.0, f64::max((2.0 * cc / k0).cbrt(), force_difference.abs() / k0));
    let roots = positive_roots(&p, q_max)?;
    select_root(&roots, hint).ok_or_else(|| Error::invalid("cubic has no positive root"))
}
