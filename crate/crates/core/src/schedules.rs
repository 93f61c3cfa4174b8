//! Time-dependent scalar control parameters.
//!
//! Every coefficient of a driven system (trap stiffness, trap centre,
//! quartic strength, applied forces, rotation angle) is a
//! [`ControlSchedule`]. Schedules are immutable once built and evaluate to
//! a value and its first two time derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step used wherever a derivative has to be taken numerically.
pub fn fd_step(t: f64) -> f64 {
    f64::max(1e-6, 1e-6 * t.abs())
}

/// Central difference of `f` at `t` with step [`fd_step`].
pub fn central_difference<F>(f: F, t: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let h = fd_step(t);
    Ok((f(t + h)? - f(t - h)?) / (2.0 * h))
}

/// A scalar function of time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlSchedule {
    Constant {
        value: f64,
    },
    /// Linear interpolation between `from` and `to` on `[t_start, t_end]`,
    /// held constant outside.
    LinearRamp {
        t_start: f64,
        t_end: f64,
        from: f64,
        to: f64,
    },
    /// `Σ cᵢ tⁱ`, lowest order first.
    Polynomial {
        coefficients: Vec<f64>,
    },
    /// Minimal-jerk quintic `10s³ − 15s⁴ + 6s⁵` between `from` and `to`,
    /// held constant outside `[t_start, t_end]`.
    Smoothstep {
        t_start: f64,
        t_end: f64,
        from: f64,
        to: f64,
    },
    Sampled(SampledTable),
    /// `scale · |base(t)|^exponent`.
    AbsPower {
        base: Box<ControlSchedule>,
        scale: f64,
        exponent: f64,
    },
}

impl ControlSchedule {
    pub fn constant(value: f64) -> Self {
        ControlSchedule::Constant { value }
    }

    pub fn linear_ramp(t_start: f64, t_end: f64, from: f64, to: f64) -> Result<Self> {
        check_interval(t_start, t_end)?;
        Ok(ControlSchedule::LinearRamp {
            t_start,
            t_end,
            from,
            to,
        })
    }

    pub fn polynomial(coefficients: Vec<f64>) -> Self {
        ControlSchedule::Polynomial { coefficients }
    }

    pub fn smoothstep(t_start: f64, t_end: f64, from: f64, to: f64) -> Result<Self> {
        check_interval(t_start, t_end)?;
        Ok(ControlSchedule::Smoothstep {
            t_start,
            t_end,
            from,
            to,
        })
    }

    pub fn abs_power(base: ControlSchedule, scale: f64, exponent: f64) -> Self {
        ControlSchedule::AbsPower {
            base: Box::new(base),
            scale,
            exponent,
        }
    }

    /// Checks the parameters of a deserialized schedule.
    pub fn validate(&self) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let ok = match self {
            ControlSchedule::Constant { value } => finite(&[*value]),
            ControlSchedule::LinearRamp {
                t_start,
                t_end,
                from,
                to,
            }
            | ControlSchedule::Smoothstep {
                t_start,
                t_end,
                from,
                to,
            } => {
                check_interval(*t_start, *t_end)?;
                finite(&[*from, *to])
            }
            ControlSchedule::Polynomial { coefficients } => finite(coefficients),
            ControlSchedule::Sampled(_) => true,
            ControlSchedule::AbsPower {
                base,
                scale,
                exponent,
            } => {
                base.validate()?;
                finite(&[*scale, *exponent])
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("schedule parameters must be finite"))
        }
    }

    /// Time interval on which the schedule is defined; `None` when total.
    pub fn domain(&self) -> Option<(f64, f64)> {
        match self {
            ControlSchedule::Sampled(table) => Some(table.domain()),
            ControlSchedule::AbsPower { base, .. } => base.domain(),
            _ => None,
        }
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        Ok(self.eval(t)?.0)
    }

    pub fn derivative(&self, t: f64) -> Result<f64> {
        Ok(self.eval(t)?.1)
    }

    pub fn second_derivative(&self, t: f64) -> Result<f64> {
        Ok(self.eval(t)?.2)
    }

    /// Value, first and second derivative at `t`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64, f64)> {
        match self {
            ControlSchedule::Constant { value } => Ok((*value, 0.0, 0.0)),
            ControlSchedule::LinearRamp {
                t_start,
                t_end,
                from,
                to,
            } => {
                let span = t_end - t_start;
                if t < *t_start {
                    Ok((*from, 0.0, 0.0))
                } else if t > *t_end {
                    Ok((*to, 0.0, 0.0))
                } else {
                    let s = (t - t_start) / span;
                    Ok((from + (to - from) * s, (to - from) / span, 0.0))
                }
            }
            ControlSchedule::Polynomial { coefficients } => Ok(horner(coefficients, t)),
            ControlSchedule::Smoothstep {
                t_start,
                t_end,
                from,
                to,
            } => {
                let span = t_end - t_start;
                let s = ((t - t_start) / span).clamp(0.0, 1.0);
                let delta = to - from;
                let shape = s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
                if t <= *t_start || t >= *t_end {
                    return Ok((from + delta * shape, 0.0, 0.0));
                }
                let u = 1.0 - s;
                let d1 = 30.0 * s * s * u * u;
                let d2 = 60.0 * s * u * (1.0 - 2.0 * s);
                Ok((
                    from + delta * shape,
                    delta * d1 / span,
                    delta * d2 / (span * span),
                ))
            }
            ControlSchedule::Sampled(table) => table.eval(t),
            ControlSchedule::AbsPower {
                base,
                scale,
                exponent,
            } => {
                let (b, db, ddb) = base.eval(t)?;
                let mag = b.abs();
                let sign = b.signum();
                let value = scale * mag.powf(*exponent);
                if *exponent == 0.0 {
                    return Ok((value, 0.0, 0.0));
                }
                if mag == 0.0 && *exponent < 2.0 {
                    return Err(Error::invalid(format!(
                        "abs_power with exponent {exponent} is not differentiable where its base vanishes (t={t})"
                    )));
                }
                let d1 = scale * exponent * mag.powf(exponent - 1.0) * sign * db;
                let d2 = scale
                    * exponent
                    * ((exponent - 1.0) * mag.powf(exponent - 2.0) * db * db
                        + mag.powf(exponent - 1.0) * sign * ddb);
                Ok((value, d1, d2))
            }
        }
    }
}

fn check_interval(t_start: f64, t_end: f64) -> Result<()> {
    if !(t_start.is_finite() && t_end.is_finite() && t_end > t_start) {
        return Err(Error::invalid(format!(
            "schedule interval [{t_start}, {t_end}] must be finite and non-empty"
        )));
    }
    Ok(())
}

fn horner(coefficients: &[f64], t: f64) -> (f64, f64, f64) {
    let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for &c in coefficients.iter().rev() {
        d2 = d2 * t + 2.0 * d1;
        d1 = d1 * t + v;
        v = v * t + c;
    }
    (v, d1, d2)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Natural cubic spline.
    #[default]
    Cubic,
    /// Piecewise linear; the derivative at a knot is the slope of the
    /// segment to its right (left for the last knot).
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampledTableSpec {
    times: Vec<f64>,
    values: Vec<f64>,
    #[serde(default)]
    interpolation: Interpolation,
}

/// Tabulated schedule, defined only on `[times[0], times[n-1]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SampledTableSpec", into = "SampledTableSpec")]
pub struct SampledTable {
    times: Vec<f64>,
    values: Vec<f64>,
    interpolation: Interpolation,
    /// Second derivatives at the knots (all zero for linear tables).
    curvature: Vec<f64>,
}

impl SampledTable {
    pub fn new(times: Vec<f64>, values: Vec<f64>, interpolation: Interpolation) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::invalid("sampled table needs as many values as times"));
        }
        if times.len() < 2 {
            return Err(Error::invalid("sampled table needs at least two knots"));
        }
        if times.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err(Error::invalid("sampled table entries must be finite"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "sampled table timestamps must be strictly increasing",
            ));
        }
        let curvature = match interpolation {
            Interpolation::Linear => vec![0.0; times.len()],
            Interpolation::Cubic => natural_spline_curvature(&times, &values),
        };
        Ok(SampledTable {
            times,
            values,
            interpolation,
            curvature,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.times[0], self.times[self.times.len() - 1])
    }

    fn eval(&self, t: f64) -> Result<(f64, f64, f64)> {
        let (start, end) = self.domain();
        if !(t >= start && t <= end) {
            return Err(Error::OutOfDomain { t, start, end });
        }
        let n = self.times.len();
        // segment i covers [times[i], times[i+1]]
        let i = match self.times.partition_point(|&x| x <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let h = t1 - t0;
        match self.interpolation {
            Interpolation::Linear => {
                let s = (t - t0) / h;
                Ok((y0 + (y1 - y0) * s, (y1 - y0) / h, 0.0))
            }
            Interpolation::Cubic => {
                let (c0, c1) = (self.curvature[i], self.curvature[i + 1]);
                let a = (t1 - t) / h;
                let b = (t - t0) / h;
                let value =
                    a * y0 + b * y1 + ((a * a * a - a) * c0 + (b * b * b - b) * c1) * h * h / 6.0;
                let slope = (y1 - y0) / h - (3.0 * a * a - 1.0) * h * c0 / 6.0
                    + (3.0 * b * b - 1.0) * h * c1 / 6.0;
                let curv = a * c0 + b * c1;
                Ok((value, slope, curv))
            }
        }
    }
}

impl TryFrom<SampledTableSpec> for SampledTable {
    type Error = Error;

    fn try_from(spec: SampledTableSpec) -> Result<Self> {
        SampledTable::new(spec.times, spec.values, spec.interpolation)
    }
}

impl From<SampledTable> for SampledTableSpec {
    fn from(table: SampledTable) -> Self {
        SampledTableSpec {
            times: table.times,
            values: table.values,
            interpolation: table.interpolation,
        }
    }
}

/// Second derivatives of the natural cubic spline through the knots
/// (tridiagonal solve, zero curvature at both ends).
fn natural_spline_curvature(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        diag[i] = 2.0 * (h0 + h1);
        upper[i] = h1;
        rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    // forward sweep over interior rows 1..n-1; the sub-diagonal of row i is h_{i-1}
    for i in 2..n - 1 {
        let lower = x[i] - x[i - 1];
        let w = lower / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    for i in (1..n - 1).rev() {
        let next = if i + 1 < n - 1 { m[i + 1] } else { 0.0 };
        m[i] = (rhs[i] - upper[i] * next) / diag[i];
    }
    m
}
