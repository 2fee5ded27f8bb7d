//! Modal stability analysis of delayed abstract thermoelastic systems.
//!
//! Both systems couple `u'' + A u` with `θ' + A^α θ` through `A^β` and carry
//! a constant delay `τ`, either in the elastic term (with Kelvin–Voigt
//! damping `aAu'`) or in the heat term. Everything reduces mode by mode along
//! the eigenvalues `λ_j` of `A`.

pub mod chareq;
pub mod error;
pub mod generator;
pub mod model;
pub mod presets;
pub mod regions;
pub mod resolvent;
pub mod suites;
pub mod timesim;

pub use error::{Error, Result};
