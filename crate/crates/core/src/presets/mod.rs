//! Ready-made systems: two ions in a moving/expanding trap, two ions
//! being separated, a two-ion phase gate, one ion in a rotating
//! anisotropic trap, and two masses coupled by springs.
//!
//! Each model implements [`Coefficients`] with closed-form or root-solved
//! equilibria and also exposes the untruncated potential, which the test
//! suite differentiates numerically to check every formula here.

mod phase_gate;
mod rotation;
mod separation;
mod springs;
mod transport;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use phase_gate::{
    build_phase_gate, build_phase_gate_audited, build_phase_gate_zeroth_order, ClosedFormEquilibrium,
    DiscrepancyKind, EquilibriumAudit, FormulaDiscrepancy, PhaseGateConfig, PhaseGateModel,
    ZerothOrderPhaseGate, FORMULA_TOLERANCE,
};
pub use rotation::{build_rotation, RotationConfig, RotationModel};
pub use separation::{
    build_separation, separability_condition_separation, SeparationConfig, SeparationCondition,
    SeparationModel, DEFAULT_TOL_COND,
};
pub use springs::{build_springs, SpringsConfig, SpringsModel};
pub use transport::{build_transport, TransportConfig, TransportModel};

use crate::error::{Error, Result};
use crate::quadratic::{MassPair, QuadraticSystem, ScheduledCoefficients};
use crate::schedules::ControlSchedule;

pub(crate) fn default_cc() -> f64 {
    1.0
}

pub(crate) fn check_cc(cc: f64) -> Result<()> {
    if cc.is_finite() && cc > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("Coulomb constant must be positive, got {cc}")))
    }
}

/// A system given directly by its stiffness and equilibrium schedules.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub masses: MassPair,
    pub k: ControlSchedule,
    pub k1: ControlSchedule,
    pub k2: ControlSchedule,
    pub q1_eq: ControlSchedule,
    pub q2_eq: ControlSchedule,
}

/// One of the supported scenarios, as read from a run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PresetConfig {
    Transport(TransportConfig),
    Separation(SeparationConfig),
    PhaseGate(PhaseGateConfig),
    Rotation(RotationConfig),
    Springs(SpringsConfig),
    Raw(RawConfig),
}

impl PresetConfig {
    pub fn name(&self) -> &'static str {
        match self {
            PresetConfig::Transport(_) => "transport",
            PresetConfig::Separation(_) => "separation",
            PresetConfig::PhaseGate(_) => "phase_gate",
            PresetConfig::Rotation(_) => "rotation",
            PresetConfig::Springs(_) => "springs",
            PresetConfig::Raw(_) => "raw",
        }
    }

    pub fn build(&self) -> Result<QuadraticSystem> {
        match self {
            PresetConfig::Transport(cfg) => build_transport(cfg),
            PresetConfig::Separation(cfg) => build_separation(cfg),
            PresetConfig::PhaseGate(cfg) if cfg.zeroth_order => {
                Ok(build_phase_gate_zeroth_order(cfg)?.system())
            }
            PresetConfig::PhaseGate(cfg) => build_phase_gate(cfg),
            PresetConfig::Rotation(cfg) => build_rotation(cfg),
            PresetConfig::Springs(cfg) => build_springs(cfg),
            PresetConfig::Raw(cfg) => {
                for s in [&cfg.k, &cfg.k1, &cfg.k2, &cfg.q1_eq, &cfg.q2_eq] {
                    s.validate()?;
                }
                Ok(QuadraticSystem::new(
                    cfg.masses,
                    Arc::new(ScheduledCoefficients {
                        k: cfg.k.clone(),
                        k1: cfg.k1.clone(),
                        k2: cfg.k2.clone(),
                        q1_eq: cfg.q1_eq.clone(),
                        q2_eq: cfg.q2_eq.clone(),
                    }),
                ))
            }
        }
    }

    /// Short content hash identifying this configuration in outputs.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("preset configs always serialize");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }
}
