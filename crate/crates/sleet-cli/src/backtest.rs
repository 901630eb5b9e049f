//! Backtest orchestration: loads a dataset, runs the configured rule or
//! oracle over it in strict arrival order, and assembles the report.

use sleet_core::eval::{residual_quantiles, rmse_rule, BacktestReport};
use sleet_core::loss::LossSpec;
use sleet_core::operational::{make_prior, ExpertGroups, OperationalState};
use sleet_core::oracles::{
    best_compound_expert, best_convex_vector, best_single_expert, partition_oracles, uniform_rule,
    Dataset,
};
use sleet_core::rules::{regret_vs_expert, RuleKind, RuleState};
use sleet_core::tuning::{GridPoint, MemberSpec, MetaState};
use sleet_core::types::{
    aggregate_prediction, condition, ActiveSet, ExpertId, ForecastRound, WeightVector,
};

use crate::config::{Action, OracleKind, PriorMode, RulePlan, RunConfig, Tuning};
use crate::dataset_io::{load_dataset, LoadedDataset};
use crate::error::{CliError, Result};

/// A finished backtest: the report plus human-readable side notes (oracle
/// scores, fallback counts) that accompany it on stdout.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub report: BacktestReport,
    pub notes: Vec<String>,
}

// ---------------------------------------------------------------------------
// Online rules
// ---------------------------------------------------------------------------

enum Runner {
    Base(RuleState),
    Operational(OperationalState),
    Meta(MetaState),
}

impl Runner {
    fn step(
        &mut self,
        round: &ForecastRound,
        next_active: Option<&ActiveSet>,
    ) -> sleet_core::Result<WeightVector> {
        match self {
            Runner::Base(state) => state.step(round, next_active),
            Runner::Operational(state) => state.step(round, next_active),
            Runner::Meta(state) => state.step(round, next_active),
        }
    }

    fn selected_point(&self) -> Option<GridPoint> {
        match self {
            Runner::Meta(state) => Some(state.selected_point()),
            _ => None,
        }
    }
}

fn base_rule(
    kind: RuleKind,
    gradient: bool,
    loss: LossSpec,
    eta: f64,
    alpha: Option<f64>,
    prior: WeightVector,
) -> Result<RuleState> {
    let state = match kind {
        RuleKind::Ewa => RuleState::ewa(loss, eta, prior),
        RuleKind::Specialist => RuleState::specialist(loss, eta, prior),
        RuleKind::FixedShare => {
            let alpha = alpha.ok_or_else(|| {
                CliError::Config("fixed-share needs alpha".into())
            })?;
            RuleState::fixed_share(loss, eta, alpha, prior)
        }
    }
    .map_err(CliError::Core)?;
    Ok(if gradient { state.gradientize() } else { state })
}

fn build_runner(plan: &RulePlan, loss: LossSpec, prior: WeightVector) -> Result<Runner> {
    match &plan.tuning {
        Tuning::Fixed { eta, alpha } => {
            let base = base_rule(plan.kind, plan.gradient, loss, *eta, *alpha, prior)?;
            Ok(match plan.block_size {
                Some(block) => Runner::Operational(
                    OperationalState::new(block, base).map_err(CliError::Core)?,
                ),
                None => Runner::Base(base),
            })
        }
        Tuning::Meta { grid } => {
            let (grid, adaptive) = grid.build(plan.kind)?;
            let spec = MemberSpec {
                kind: plan.kind,
                loss,
                gradient: plan.gradient,
                prior,
                block_size: plan.block_size,
            };
            Ok(Runner::Meta(MetaState::new(spec, grid, adaptive).map_err(CliError::Core)?))
        }
    }
}

// ---------------------------------------------------------------------------
// Shared replay
// ---------------------------------------------------------------------------

/// Folds a weight trajectory over the data into a report: predictions,
/// residuals, losses, regrets, and grouped residual spread.
fn assemble_report(
    cfg: &RunConfig,
    loaded: &LoadedDataset,
    weight_trajectory: Vec<WeightVector>,
    selected: Option<Vec<GridPoint>>,
) -> Result<BacktestReport> {
    let data = &loaded.data;
    let rounds = data.rounds();
    let n = data.expert_count();
    let mut residuals = Vec::with_capacity(rounds.len());
    let mut loss_sum = 0.0;
    for (weights, round) in weight_trajectory.iter().zip(rounds) {
        let wrap = |e| CliError::Round { t: round.t(), source: e };
        let y = round.observation_or_err().map_err(wrap)?;
        let prediction = aggregate_prediction(weights, round).map_err(wrap)?;
        residuals.push(prediction - y);
        loss_sum += cfg.loss.eval(prediction, y).map_err(wrap)?;
    }
    let history: Vec<(WeightVector, ForecastRound)> = weight_trajectory
        .iter()
        .cloned()
        .zip(rounds.iter().cloned())
        .collect();
    let regrets = (0..n)
        .map(|j| regret_vs_expert(&history, ExpertId(j), cfg.loss))
        .collect::<sleet_core::Result<Vec<f64>>>()
        .map_err(CliError::Core)?;
    let rmse = if cfg.loss == LossSpec::Square {
        Some(rmse_rule(&residuals).map_err(CliError::Core)?)
    } else {
        None
    };
    let group_quantiles = match &loaded.groups {
        Some(labels) => residual_quantiles(&residuals, labels).map_err(CliError::Core)?,
        None => {
            let labels = vec!["all"; residuals.len()];
            residual_quantiles(&residuals, &labels).map_err(CliError::Core)?
        }
    };
    Ok(BacktestReport {
        rule: cfg.rule_label.clone(),
        loss: cfg.loss,
        rounds: rounds.len(),
        experts: n,
        rmse,
        mean_loss: loss_sum / rounds.len() as f64,
        regrets,
        residuals,
        weight_trajectory,
        selected,
        group_quantiles,
    })
}

fn run_rule(cfg: &RunConfig, plan: &RulePlan, loaded: &LoadedDataset) -> Result<RunOutcome> {
    let n = loaded.data.expert_count();
    let prior = build_prior(&cfg.prior, n)?;
    let mut runner = build_runner(plan, cfg.loss, prior)?;
    let rounds = loaded.data.rounds();
    let mut weight_trajectory = Vec::with_capacity(rounds.len());
    let mut selected: Option<Vec<GridPoint>> =
        matches!(runner, Runner::Meta(_)).then(Vec::new);
    for (i, round) in rounds.iter().enumerate() {
        if let Some(points) = &mut selected {
            points.push(runner.selected_point().expect("meta runner carries a selection"));
        }
        // The final round shares toward its own active set.
        let next_active = rounds.get(i + 1).map_or(round.active(), |r| r.active());
        let played = runner
            .step(round, Some(next_active))
            .map_err(|e| CliError::Round { t: round.t(), source: e })?;
        weight_trajectory.push(played);
    }
    let report = assemble_report(cfg, loaded, weight_trajectory, selected)?;
    Ok(RunOutcome { report, notes: Vec::new() })
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// Conditions a fixed vector on a round's active set, falling back to the
/// uniform vector when the target abstains (no mass on the set). Returns
/// the played weights and whether the fallback fired.
fn condition_or_uniform(base: &WeightVector, active: &ActiveSet) -> Result<(WeightVector, bool)> {
    let conditioned = condition(base, active).map_err(CliError::Core)?;
    if !conditioned.is_zero() {
        let weights =
            WeightVector::new(conditioned.as_slice().to_vec()).map_err(CliError::Core)?;
        return Ok((weights, false));
    }
    let uniform = WeightVector::uniform(active.expert_count()).map_err(CliError::Core)?;
    let conditioned = condition(&uniform, active).map_err(CliError::Core)?;
    let weights = WeightVector::new(conditioned.as_slice().to_vec()).map_err(CliError::Core)?;
    Ok((weights, true))
}

/// Replays a fixed target vector across all rounds; notes how often the
/// uniform fallback had to stand in.
fn fixed_vector_trajectory(
    data: &Dataset,
    target: &WeightVector,
    notes: &mut Vec<String>,
) -> Result<Vec<WeightVector>> {
    let mut trajectory = Vec::with_capacity(data.len());
    let mut fallbacks = 0usize;
    for round in data.rounds() {
        let (weights, fell_back) = condition_or_uniform(target, round.active())?;
        if fell_back {
            fallbacks += 1;
        }
        trajectory.push(weights);
    }
    if fallbacks > 0 {
        notes.push(format!(
            "rounds replayed with the uniform fallback (target had no mass on the active set): {fallbacks}"
        ));
    }
    Ok(trajectory)
}

fn run_oracle(cfg: &RunConfig, kind: OracleKind, loaded: &LoadedDataset) -> Result<RunOutcome> {
    let data = &loaded.data;
    let n = data.expert_count();
    let mut notes = Vec::new();
    let trajectory: Vec<WeightVector> = match kind {
        OracleKind::Uniform => {
            let score = uniform_rule(data, cfg.loss).map_err(CliError::Core)?;
            notes.push(format!("uniform oracle score = {score:.6e}"));
            let uniform = WeightVector::uniform(n).map_err(CliError::Core)?;
            fixed_vector_trajectory(data, &uniform, &mut notes)?
        }
        OracleKind::BestExpert => {
            let (id, score) = best_single_expert(data, cfg.loss).map_err(CliError::Core)?;
            notes.push(format!(
                "best expert = {} (index {}), per-active-round score = {score:.6e}",
                loaded.expert_names.get(id.0).map_or("?", String::as_str),
                id.0
            ));
            let dirac = WeightVector::dirac(n, id.0).map_err(CliError::Core)?;
            fixed_vector_trajectory(data, &dirac, &mut notes)?
        }
        OracleKind::BestConvex => {
            let (q, score) =
                best_convex_vector(data, cfg.loss, cfg.budget, cfg.seed).map_err(CliError::Core)?;
            notes.push(format!(
                "best convex activity-weighted score = {score:.6e} (budget {}, seed {})",
                cfg.budget, cfg.seed
            ));
            fixed_vector_trajectory(data, &q, &mut notes)?
        }
        OracleKind::BestCompound(switches) => {
            compound_trajectory(data, cfg.loss, switches, &mut notes)?
        }
        OracleKind::Prescient => {
            let switches = data.len() - 1;
            notes.push(format!("prescient strategy = compound expert with {switches} switches allowed"));
            compound_trajectory(data, cfg.loss, switches, &mut notes)?
        }
        OracleKind::Partition => {
            let benchmarks =
                partition_oracles(data, cfg.loss, cfg.budget, cfg.seed).map_err(CliError::Core)?;
            notes.push(format!("partition elements (distinct active sets) = {}", benchmarks.elements));
            notes.push(format!(
                "partition best-expert combined score = {:.6e}",
                benchmarks.best_expert
            ));
            notes.push(format!(
                "partition best-convex combined score = {:.6e} (budget {}, seed {})",
                benchmarks.best_convex, cfg.budget, cfg.seed
            ));
            partition_trajectory(data, cfg.loss, cfg.budget, cfg.seed)?
        }
    };
    let report = assemble_report(cfg, loaded, trajectory, None)?;
    Ok(RunOutcome { report, notes })
}

fn compound_trajectory(
    data: &Dataset,
    loss: LossSpec,
    switches: usize,
    notes: &mut Vec<String>,
) -> Result<Vec<WeightVector>> {
    let (compound, cumulative) =
        best_compound_expert(data, loss, switches).map_err(CliError::Core)?;
    notes.push(format!(
        "compound expert uses {} of {} allowed switches, cumulative loss = {cumulative:.6e}",
        compound.size(),
        switches
    ));
    let n = data.expert_count();
    compound
        .assignment()
        .iter()
        .map(|id| WeightVector::dirac(n, id.0).map_err(CliError::Core))
        .collect()
}

/// Per-round weights for the partition oracle: rounds are grouped by their
/// active set, the best convex vector is searched per group (same budget
/// and per-group seed schedule as the combined score), and each round plays
/// its group's vector conditioned on the shared active set.
fn partition_trajectory(
    data: &Dataset,
    loss: LossSpec,
    budget: usize,
    seed: u64,
) -> Result<Vec<WeightVector>> {
    use std::collections::BTreeMap;
    let mut elements: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (i, round) in data.rounds().iter().enumerate() {
        elements.entry(round.active().members().to_vec()).or_default().push(i);
    }
    let mut trajectory: Vec<Option<WeightVector>> = vec![None; data.len()];
    for (k, (_, indices)) in elements.iter().enumerate() {
        let rounds: Vec<ForecastRound> =
            indices.iter().map(|&i| data.rounds()[i].clone()).collect();
        let element = Dataset::new(rounds, data.bound()).map_err(CliError::Core)?;
        let (q, _) = best_convex_vector(&element, loss, budget, seed.wrapping_add(k as u64))
            .map_err(CliError::Core)?;
        // All rounds of an element share one active set; the searched vector
        // always carries mass there, so no fallback can fire.
        let (weights, _) = condition_or_uniform(&q, element.rounds()[0].active())?;
        for &i in indices {
            trajectory[i] = Some(weights.clone());
        }
    }
    Ok(trajectory.into_iter().map(|w| w.expect("every round belongs to an element")).collect())
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

fn build_prior(mode: &PriorMode, n: usize) -> Result<WeightVector> {
    match mode {
        PriorMode::Uniform => WeightVector::uniform(n).map_err(CliError::Core),
        PriorMode::Fair(sizes) => {
            let total: usize = sizes.iter().sum();
            if total != n {
                return Err(CliError::Config(format!(
                    "group sizes sum to {total} but the dataset has {n} experts"
                )));
            }
            let groups = ExpertGroups::from_sizes(sizes).map_err(CliError::Core)?;
            Ok(make_prior(&groups))
        }
    }
}

/// Loads the dataset named by the config and streams it through the
/// configured rule or oracle in strict arrival order. Deterministic given
/// the config and seed.
pub fn run_backtest(cfg: &RunConfig) -> Result<RunOutcome> {
    let loaded = load_dataset(&cfg.data, cfg.bound)?;
    match &cfg.action {
        Action::Rule(plan) => run_rule(cfg, plan, &loaded),
        Action::Oracle(kind) => run_oracle(cfg, *kind, &loaded),
    }
}
