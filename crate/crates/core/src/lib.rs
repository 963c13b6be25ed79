//! Primal-dual regularized offline reinforcement learning on finite MDPs.
//!
//! The crate solves the behavior-regularized occupancy LP exactly (the
//! oracle), estimates its saddle point from offline data over finite function
//! classes, turns the estimated density ratios into a policy, and measures
//! everything against the closed-form statistical guarantees.

pub mod bounds;
pub mod classes;
pub mod dataset;
pub mod error;
pub mod extraction;
pub mod harness;
pub mod mdp;
pub mod objective;
pub mod oracle;
pub mod regularizer;
pub mod saddle;

pub use error::{Error, Result};
