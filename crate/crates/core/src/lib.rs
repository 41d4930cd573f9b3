//! Empirical game-theoretic analysis of lane-changing interactions between
//! automated (AV) and human-driven (HDV) vehicles.
//!
//! The pipeline runs: trajectory extraction → behavior clustering → joint
//! quantal-response utility estimation → empirical payoff tables and
//! social-dilemma classification → lattice evolutionary simulation.

pub mod cluster;
pub mod error;
pub mod evolution;
pub mod extract;
pub mod games;
pub mod io;
pub mod numeric;
pub mod optimize;
pub mod pipeline;
pub mod qre;
pub mod standardize;
pub mod types;

pub use error::{Error, Result};
pub use types::{Behavior, InteractionType, Outcome, Pair, Role, VehicleType};
