//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's numerics.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    r.gen_range(lo..hi)
}

/// Gradient of `f` at `x` by the five-point stencil.
pub fn gradient<F: Fn([f64; 2]) -> f64>(f: &F, x: [f64; 2], h: f64) -> [f64; 2] {
    let mut g = [0.0; 2];
    for i in 0..2 {
        let at = |s: f64| {
            let mut y = x;
            y[i] += s;
            f(y)
        };
        g[i] = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
    }
    g
}

/// Hessian of `f` at `x` by fourth-order stencils.
pub fn hessian<F: Fn([f64; 2]) -> f64>(f: &F, x: [f64; 2], h: f64) -> [[f64; 2]; 2] {
    let at = |di: f64, dj: f64| f([x[0] + di, x[1] + dj]);
    let mut hs = [[0.0; 2]; 2];
    let f0 = at(0.0, 0.0);
    // diagonal: (−f(2h) + 16f(h) − 30f(0) + 16f(−h) − f(−2h)) / 12h²
    let diag = |e: [f64; 2]| {
        let g = |s: f64| at(s * e[0], s * e[1]);
        (-g(2.0 * h) + 16.0 * g(h) - 30.0 * f0 + 16.0 * g(-h) - g(-2.0 * h)) / (12.0 * h * h)
    };
    hs[0][0] = diag([1.0, 0.0]);
    hs[1][1] = diag([0.0, 1.0]);
    // mixed: fourth-order cross stencil
    let m = |a: f64, b: f64| at(a * h, b * h);
    let mixed = (8.0 * (m(1.0, -2.0) + m(2.0, -1.0) + m(-2.0, 1.0) + m(-1.0, 2.0))
        - 8.0 * (m(-1.0, -2.0) + m(-2.0, -1.0) + m(1.0, 2.0) + m(2.0, 1.0))
        - (m(2.0, -2.0) + m(-2.0, 2.0) - m(-2.0, -2.0) - m(2.0, 2.0))
        + 64.0 * (m(-1.0, -1.0) + m(1.0, 1.0) - m(1.0, -1.0) - m(-1.0, 1.0)))
        / (144.0 * h * h);
    hs[0][1] = mixed;
    hs[1][0] = mixed;
    hs
}

/// Root of `f` on `[lo, hi]` by plain bisection.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    assert!(f_lo.signum() != f(hi).signum(), "bisection needs a sign change");
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == f_lo.signum() {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest positive root of a polynomial (coefficients highest order
/// first) that is negative at zero, by expanding the bracket then
/// bisecting.
pub fn first_positive_root(coeffs_high_first: &[f64]) -> f64 {
    let p = |x: f64| coeffs_high_first.iter().fold(0.0, |acc, c| acc * x + c);
    assert!(p(0.0) < 0.0);
    // walk outward on a fine geometric grid to the first sign change
    let mut a = 1e-9;
    loop {
        let b = a * 1.01;
        if p(b) >= 0.0 {
            return bisect(p, a, b);
        }
        a = b;
        assert!(a < 1e9, "no positive root");
    }
}

/// Eigenvalues of the symmetric matrix `[[a, b], [b, d]]`, ascending.
pub fn sym_eigenvalues(a: f64, b: f64, d: f64) -> [f64; 2] {
    let mean = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    [mean - r, mean + r]
}

/// `M^{-1/2} K M^{-1/2}` for `K = [[k+k1, −k], [−k, k+k2]]`.
pub fn mass_weighted(k: f64, k1: f64, k2: f64, m1: f64, m2: f64) -> [[f64; 2]; 2] {
    let off = -k / (m1 * m2).sqrt();
    [[(k + k1) / m1, off], [off, (k + k2) / m2]]
}

/// Fixed-step RK4 for a 1D oscillator `ẍ = −w2(t) x`.
pub fn oscillator_1d<W: Fn(f64) -> f64>(w2: W, x0: f64, v0: f64, t0: f64, t1: f64, n: usize) -> Vec<(f64, f64, f64)> {
    let h = (t1 - t0) / n as f64;
    let rhs = |t: f64, s: [f64; 2]| [s[1], -w2(t) * s[0]];
    let mut s = [x0, v0];
    let mut out = vec![(t0, s[0], s[1])];
    for i in 0..n {
        let t = t0 + h * i as f64;
        let k1 = rhs(t, s);
        let k2 = rhs(t + 0.5 * h, [s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1]]);
        let k3 = rhs(t + 0.5 * h, [s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1]]);
        let k4 = rhs(t + h, [s[0] + h * k3[0], s[1] + h * k3[1]]);
        for j in 0..2 {
            s[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        out.push((if i + 1 == n { t1 } else { t0 + h * (i + 1) as f64 }, s[0], s[1]));
    }
    out
}

/// Quintic smoothstep on `[t0, t1]` from `a` to `b`, value and rate.
pub fn smoothstep(t: f64, t0: f64, t1: f64, a: f64, b: f64) -> (f64, f64) {
    let span = t1 - t0;
    let s = ((t - t0) / span).clamp(0.0, 1.0);
    let shape = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    let rate = if (0.0..=1.0).contains(&((t - t0) / span)) {
        30.0 * s * s * (1.0 - s) * (1.0 - s) / span
    } else {
        0.0
    };
    (a + (b - a) * shape, (b - a) * rate)
}
