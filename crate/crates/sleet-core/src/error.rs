//! Crate-wide error type.
//!
//! Every fallible operation in this crate returns [`Error`]. Variants are
//! grouped by the contract they enforce: input validation, state/schedule
//! consistency, and numeric feasibility.

use core::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by construction, prediction, and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An active set with no members was supplied or derived.
    EmptyActiveSet,
    /// An expert index was at least the declared expert count.
    ExpertOutOfRange { expert: usize, count: usize },
    /// A forecast for an active expert was missing or not finite.
    InvalidForecast { expert: usize },
    /// A weight vector failed validation (negative entry, wrong mass, or
    /// non-finite entry). The message names the violated condition.
    InvalidWeights(&'static str),
    /// Two sequences that must be aligned had different lengths.
    LengthMismatch { expected: usize, got: usize },
    /// An update or evaluation needed an observation the round did not carry.
    MissingObservation,
    /// A scalar parameter violated its domain; the message names it.
    InvalidParameter(&'static str),
    /// The loss is undefined at the given point (for example a percentage
    /// loss with a non-positive observation).
    LossDomain(&'static str),
    /// Prediction is impossible: the current weights or prior put zero mass
    /// on every active expert.
    NoActiveMass,
    /// The rule state carries weight outside the announced active set, so the
    /// activity schedule fed to the rule is inconsistent.
    MassOffActiveSet,
    /// A fixed-share update was requested without the next round's active set.
    MissingNextActiveSet,
    /// An empty input where at least one element is required.
    EmptyInput,
    /// The requested score is undefined (for example an RMSE over rounds that
    /// all carry zero weight-mass).
    UndefinedScore(&'static str),
    /// No expert sequence with the requested switch budget covers the data.
    InfeasibleCompound { switches: usize },
    /// A tuning grid failed validation; the message names the condition.
    InvalidGrid(&'static str),
    /// A wrapper was given a state that has already been advanced.
    StateAlreadyStarted,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyActiveSet => write!(f, "active set must contain at least one expert"),
            Error::ExpertOutOfRange { expert, count } => {
                write!(f, "expert index {expert} out of range for {count} experts")
            }
            Error::InvalidForecast { expert } => {
                write!(f, "active expert {expert} has a missing or non-finite forecast")
            }
            Error::InvalidWeights(msg) => write!(f, "invalid weight vector: {msg}"),
            Error::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: expected {expected}, got {got}")
            }
            Error::MissingObservation => write!(f, "round carries no observation"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::LossDomain(msg) => write!(f, "loss undefined: {msg}"),
            Error::NoActiveMass => {
                write!(f, "weights put zero mass on the active set; prediction undefined")
            }
            Error::MassOffActiveSet => {
                write!(f, "state carries weight outside the active set; schedule inconsistent")
            }
            Error::MissingNextActiveSet => {
                write!(f, "fixed-share update requires the next round's active set")
            }
            Error::EmptyInput => write!(f, "input must be non-empty"),
            Error::UndefinedScore(msg) => write!(f, "score undefined: {msg}"),
            Error::InfeasibleCompound { switches } => {
                write!(f, "no expert sequence with at most {switches} switches covers the data")
            }
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::StateAlreadyStarted => {
                write!(f, "state has already processed rounds; a fresh state is required")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
