//! Sequential aggregation of sleeping experts.
//!
//! A population of experts issues forecasts, but not all of them in every
//! round: experts sleep when their specialization does not apply. This crate
//! provides
//!
//! * convex aggregation rules that predict with the active experts and carry
//!   regret or weight state across rounds ([`rules`]),
//! * operational variants that refresh their weights only on block
//!   boundaries, for deployments that must commit to weights ahead of time
//!   ([`operational`]),
//! * online tuning that runs a grid of parameterized rules and follows the
//!   one with the smallest cumulative loss, optionally growing the grid at
//!   its endpoints ([`tuning`]),
//! * offline oracles for benchmarking: best single expert, best convex
//!   combination, best expert sequence under a switch budget, and
//!   per-activity-pattern optima ([`oracles`]),
//! * evaluation helpers: RMSE, regrets, activity statistics, and residual
//!   quantiles ([`eval`]).
//!
//! The crate is `no_std`-compatible (with `alloc`); enable the `libm`
//! feature instead of the default `std` to build without the standard
//! library.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

mod error;
mod numeric;

pub mod eval;
pub mod loss;
pub mod operational;
pub mod oracles;
pub mod rules;
pub mod tuning;
pub mod types;

pub use error::{Error, Result};
pub use loss::{loss_subgradient, LossSpec};
pub use types::{
    aggregate_prediction, condition, ActiveSet, Bounds, ConditionedVector, ExpertId,
    ForecastRound, WeightVector, WEIGHT_SUM_TOLERANCE,
};
