//! Loss functions and their subgradients.
//!
//! All rules observe the loss only through its value at the prediction and a
//! subgradient there, so supporting a new loss means adding a variant with
//! those two pieces. The built-in losses are convex in the prediction, which
//! is what the regret guarantees of the aggregation rules require.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::numeric::sign;
use crate::types::{ForecastRound, WeightVector};

/// Convex loss `l(x, y)` of predicting `x` against the observation `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossSpec {
    /// `(x - y)^2`.
    Square,
    /// `|x - y|`.
    Absolute,
    /// `|x - y| / y`; requires `y > 0`.
    AbsolutePercentage,
}

impl LossSpec {
    /// Evaluates the loss.
    pub fn eval(&self, prediction: f64, observation: f64) -> Result<f64> {
        match self {
            LossSpec::Square => {
                let d = prediction - observation;
                Ok(d * d)
            }
            LossSpec::Absolute => Ok(crate::numeric::abs(prediction - observation)),
            LossSpec::AbsolutePercentage => {
                if observation <= 0.0 {
                    return Err(Error::LossDomain(
                        "percentage loss requires a positive observation",
                    ));
                }
                Ok(crate::numeric::abs(prediction - observation) / observation)
            }
        }
    }

    /// Subgradient of `x -> l(x, y)` at `x = prediction`.
    ///
    /// For the piecewise-linear losses the kink at `x = y` uses the zero
    /// subgradient, so a perfect prediction induces no update in
    /// gradient-mode rules.
    pub fn derivative(&self, prediction: f64, observation: f64) -> Result<f64> {
        match self {
            LossSpec::Square => Ok(2.0 * (prediction - observation)),
            LossSpec::Absolute => Ok(sign(prediction - observation)),
            LossSpec::AbsolutePercentage => {
                if observation <= 0.0 {
                    return Err(Error::LossDomain(
                        "percentage loss requires a positive observation",
                    ));
                }
                Ok(sign(prediction - observation) / observation)
            }
        }
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            LossSpec::Square => "square",
            LossSpec::Absolute => "absolute",
            LossSpec::AbsolutePercentage => "absolute-percentage",
        };
        write!(f, "{name}")
    }
}

/// Gradient of the map `w -> l(w . f, y)` at `weights`, as a full-length
/// vector: entry `j` is `l'(prediction, y) * f_j` for active `j` and zero for
/// inactive `j`.
///
/// This is the vector gradient-mode rules feed to their updates in place of
/// the per-expert losses.
pub fn loss_subgradient(
    spec: LossSpec,
    weights: &WeightVector,
    round: &ForecastRound,
) -> Result<Vec<f64>> {
    let y = round.observation_or_err()?;
    let prediction = crate::types::aggregate_prediction(weights, round)?;
    let slope = spec.derivative(prediction, y)?;
    let mut grad = alloc::vec![0.0; round.expert_count()];
    for j in round.active().iter() {
        // Forecast exists for every active expert by construction.
        grad[j] = slope * round.forecast(j).unwrap_or(0.0);
    }
    Ok(grad)
}
