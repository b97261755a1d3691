//! Evolutionary game of consensus-processor allocation across parallel
//! sharded blockchains.
//!
//! The crate is organised bottom-up:
//!
//! - [`ecosystem`]: the game instance, cost curves and payoff evaluation.
//! - [`elastico`]: epoch timing, reward and cost of a sharded chain, and the
//!   derivation of game coefficients from protocol parameters.
//! - [`dynamics`]: the replicator vector field, its Jacobian and the
//!   integrators producing [`dynamics::Trajectory`] values.
//! - [`equilibrium`]: the `K` function, existence tests per working set,
//!   equilibrium solves and full enumeration.
//! - [`stability`]: eigenvalue-based classification of equilibria.
//! - [`agents`]: a finite-population imitation simulator used to check the
//!   mean-field limit against the ODE.
//!
//! Chain indices are zero-based throughout the API. CSV output and
//! `Display` impls use one-based indices.

pub mod agents;
pub mod dynamics;
pub mod ecosystem;
pub mod elastico;
pub mod equilibrium;
mod error;
pub mod linalg;
pub mod stability;

pub use error::{Error, Result};
