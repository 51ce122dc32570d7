//! Co-evolution toolkit: a quadratic Nash game whose outcome drives a
//! networked linear system, with matrix-inequality machinery to certify
//! exponential convergence of the closed loop and to synthesize light-touch
//! regulation gains.
//!
//! Modules:
//! - [`lmi`]: dense LMI feasibility kernel in scalar decision coordinates,
//!   plus scalar bisection.
//! - [`game`]: the quadratic game, its pseudo-gradient map and the
//!   state-dependent polyhedral feasible set.
//! - [`gne`]: extragradient solver for the variational equilibrium, with
//!   Dykstra projections.
//! - [`network`]: follower/influencer graphs, the induced linear dynamics
//!   and the randomized case-study generator.
//! - [`certify`]: certification conditions and controller synthesis,
//!   organized as named, interchangeable methods.
//! - [`coevolve`]: the two-timescale closed loop, equilibrium location and
//!   empirical contraction estimates.

pub mod certify;
pub mod coevolve;
pub mod game;
pub mod gne;
mod linalg;
pub mod lmi;
pub mod network;
