//! Scoring and robustness summaries for finished runs.
//!
//! RMSE is defined for the square loss; runs under other losses are scored
//! by mean loss and reports label them accordingly. Residual spread is
//! summarized by per-group nearest-rank quantiles of absolute residuals.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::numeric;
use crate::oracles::{weighted_mean_loss, Dataset};
use crate::tuning::GridPoint;
use crate::types::WeightVector;

/// Root mean square of a residual sequence.
pub fn rmse_rule(residuals: &[f64]) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sum: f64 = residuals.iter().map(|r| r * r).sum();
    Ok(numeric::sqrt(sum / residuals.len() as f64))
}

/// Activity-weighted RMSE of a fixed convex vector: each round enters with
/// weight `q(E_t)`, the mass the vector places on that round's active set;
/// zero-mass rounds are skipped. Errors when every round has zero mass.
pub fn rmse_convex(data: &Dataset, q: &WeightVector) -> Result<f64> {
    match weighted_mean_loss(data, LossSpec::Square, q.as_slice())? {
        Some(mean) => Ok(numeric::sqrt(mean)),
        None => Err(Error::UndefinedScore("vector has no mass on any active set")),
    }
}

/// Per-expert score and how often the expert was awake.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivityStat {
    /// Root mean loss (square loss) or mean loss (otherwise) over the
    /// expert's active rounds; `None` when the expert never wakes.
    pub score: Option<f64>,
    /// Fraction of rounds the expert was active.
    pub frequency: f64,
}

/// One `ActivityStat` per expert, plot-ready.
pub fn activity_stats(data: &Dataset, spec: LossSpec) -> Result<Vec<ActivityStat>> {
    let n = data.expert_count();
    let mut sums = alloc::vec![0.0f64; n];
    let mut counts = alloc::vec![0usize; n];
    for round in data.rounds() {
        let y = round.observation_or_err()?;
        for &j in round.active().members() {
            let f = round.forecast(j).expect("active expert has a forecast");
            sums[j] += spec.eval(f, y)?;
            counts[j] += 1;
        }
    }
    let t_len = data.len() as f64;
    Ok((0..n)
        .map(|j| {
            let score = if counts[j] == 0 {
                None
            } else {
                let mean = sums[j] / counts[j] as f64;
                Some(match spec {
                    LossSpec::Square => numeric::sqrt(mean),
                    _ => mean,
                })
            };
            ActivityStat { score, frequency: counts[j] as f64 / t_len }
        })
        .collect())
}

/// Nearest-rank quantiles of absolute residuals within one group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupQuantiles {
    pub label: String,
    pub count: usize,
    pub q50: f64,
    pub q75: f64,
    pub q90: f64,
}

fn nearest_rank(sorted: &[f64], percent: usize) -> f64 {
    // ceil(percent * n / 100) computed in integers so e.g. the 90-percent
    // rank of ten values is exactly 9.
    let rank = (percent * sorted.len()).div_ceil(100);
    sorted[rank.max(1) - 1]
}

/// The 50/75/90-percent nearest-rank quantiles of `|values|`.
pub fn abs_quantiles(values: &[f64]) -> Result<(f64, f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite residuals"));
    Ok((nearest_rank(&sorted, 50), nearest_rank(&sorted, 75), nearest_rank(&sorted, 90)))
}

/// Splits residuals by label and summarizes each group, in first-appearance
/// order. Labels align with residuals one to one.
pub fn residual_quantiles<S: AsRef<str>>(
    residuals: &[f64],
    labels: &[S],
) -> Result<Vec<GroupQuantiles>> {
    if residuals.is_empty() {
        return Err(Error::EmptyInput);
    }
    if residuals.len() != labels.len() {
        return Err(Error::LengthMismatch { expected: residuals.len(), got: labels.len() });
    }
    let mut order: Vec<&str> = Vec::new();
    for label in labels {
        let label = label.as_ref();
        if !order.contains(&label) {
            order.push(label);
        }
    }
    let mut out = Vec::with_capacity(order.len());
    for group in order {
        let values: Vec<f64> = residuals
            .iter()
            .zip(labels)
            .filter(|(_, l)| l.as_ref() == group)
            .map(|(r, _)| *r)
            .collect();
        let (q50, q75, q90) = abs_quantiles(&values)?;
        out.push(GroupQuantiles { label: String::from(group), count: values.len(), q50, q75, q90 });
    }
    Ok(out)
}

/// Everything a finished backtest produced.
#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    /// Self-description of the rule or oracle that ran.
    pub rule: String,
    pub loss: LossSpec,
    pub rounds: usize,
    pub experts: usize,
    /// Root mean squared residual; only under the square loss.
    pub rmse: Option<f64>,
    /// Mean per-round loss, defined for every loss.
    pub mean_loss: f64,
    /// Final cumulative regret against each expert (sum over that expert's
    /// active rounds of rule loss minus expert loss).
    pub regrets: Vec<f64>,
    /// Prediction minus observation, per round.
    pub residuals: Vec<f64>,
    /// Weights played each round; rows are convex vectors.
    pub weight_trajectory: Vec<WeightVector>,
    /// Parameters followed each round, when a meta-rule ran.
    pub selected: Option<Vec<GridPoint>>,
    /// Per-group spread of absolute residuals.
    pub group_quantiles: Vec<GroupQuantiles>,
}
