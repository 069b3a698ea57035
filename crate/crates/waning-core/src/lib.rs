//! Partial-identification bounds on vaccine waning from randomized-trial
//! data.
//!
//! Observed vaccine efficacy in a late interval conditions on staying
//! event-free, so it mixes the vaccine's waning protection with selection
//! over unmeasured exposure and susceptibility. The late-interval challenge
//! effect is therefore only partially identified; this crate computes the
//! sharp bounds on it, and on the waning ratio, from standard trial outputs:
//! summary event/person-time tables, per-interval logistic hazard fits, or
//! per-arm Cox fits. Inference comes from delta-method intervals on the
//! summary path and a seeded nonparametric bootstrap on the
//! individual-level paths. Simulators for three data-generating mechanisms
//! support calibration and coverage checks.

pub mod bounds;
pub mod error;
pub mod hazard;
pub mod inference;
pub mod io;
pub mod model;
pub mod simulate;

pub use error::{Error, Result};
