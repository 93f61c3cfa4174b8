//! Dynamical normal modes of two-degree-of-freedom quadratic Hamiltonians
//! with time-dependent stiffness and moving equilibria.
//!
//! ```text
//! H = Σ pᵢ²/2mᵢ + ½ (q − q⁽⁰⁾(t))ᵀ K(t) (q − q⁽⁰⁾(t))
//! ```
//!
//! [`modes`] builds the time-dependent point transformation that
//! diagonalises `H` at each instant and exposes the inertial terms it
//! leaves behind; [`presets`] supplies trapped-ion and spring systems;
//! [`dynamics`] integrates both frames so they can be checked against
//! each other.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod modes;
pub mod presets;
pub mod quadratic;
pub mod roots;
pub mod schedules;

pub use error::{Error, Result};
