use thiserror::Error;

use crate::dynamics::Trajectory;

/// Errors produced while building or evaluating a quadratic system.
#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t} is outside the schedule domain [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("preset domain error at t={t}: {reason}")]
    PresetDomain { t: f64, reason: String },

    #[error("singular configuration at t={t}: {reason}")]
    Singular { t: f64, reason: String },

    #[error("mode {mode} has zero squared frequency; displaced centers are undefined")]
    ZeroFrequency { mode: usize },

    #[error("expected a phase point in the {expected} frame, got {found}")]
    FrameMismatch {
        expected: crate::quadratic::Frame,
        found: crate::quadratic::Frame,
    },

    /// The integrated state left the finite range. `partial` holds every
    /// sample up to and including the last valid one.
    #[error("integration diverged at t={t}")]
    Divergence { t: f64, partial: Box<Trajectory> },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn preset_domain(t: f64, reason: impl Into<String>) -> Self {
        Error::PresetDomain {
            t,
            reason: reason.into(),
        }
    }
}
