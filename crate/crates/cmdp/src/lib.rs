//! Tabular constrained-MDP toolkit.
//!
//! A constrained MDP carries a reward signal `r`, a constraint-reward signal
//! `c` and a threshold `b`; the goal is to maximize the discounted reward
//! value while keeping the discounted constraint value at or above `b`.
//!
//! The crate provides:
//!
//! - exact policy evaluation, occupancy measures and metrics ([`model`],
//!   [`eval`], [`metrics`]),
//! - independent ground-truth solvers: an occupancy-measure LP, value
//!   iteration, a dual-variable scan and a Chebyshev best-linear-fit LP
//!   ([`oracle`]),
//! - feature maps and greedy G-optimal coreset construction ([`features`],
//!   [`design`]),
//! - Monte-Carlo action-value estimation with weighted least squares
//!   ([`estimation`]),
//! - primal-dual solvers: mirror-ascent / projected-gradient (GDA),
//!   parameter-free coin-betting (CBP) and a CRPO baseline ([`solvers`]),
//! - benchmark environments and a config-driven experiment harness
//!   ([`envs`], [`harness`]).

pub mod design;
pub mod envs;
pub mod estimation;
pub mod eval;
pub mod features;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod seeding;
pub mod solvers;

pub use model::{OccupancyMeasure, Policy, QFn, Signal, TabularCmdp, ValueFn};
