//! Online aggregation rules for sleeping experts.
//!
//! Three update families share one state type:
//!
//! * exponentially weighted averaging, which weights each active expert by
//!   the exponential of its cumulative regret against the rule;
//! * the specialist rule, which reweights only the active experts and leaves
//!   sleeping ones untouched while keeping the full vector convex;
//! * fixed share, which after every loss update redistributes a fraction of
//!   the surviving mass uniformly over the next round's active experts, so
//!   the rule can track the best sequence of experts rather than the best
//!   single one.
//!
//! All weight bookkeeping is done in log space: exponents of order
//! `eta * loss` reach several hundred in realistic configurations and would
//! overflow or underflow as raw products.
//!
//! Each rule also exists in a gradient variant that feeds the update the
//! linearized loss `l'(prediction, y) * forecast_j` instead of the expert's
//! own loss; predictions are formed the same way, only the bookkeeping
//! changes.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::numeric::{ln, log_sum_exp, sqrt};
use crate::types::{aggregate_prediction, condition, ActiveSet, Bounds, ExpertId, ForecastRound, WeightVector};

/// The three base update families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    /// Exponentially weighted averaging on cumulative regrets.
    Ewa,
    /// Specialist reweighting of the active experts only.
    Specialist,
    /// Specialist loss step followed by uniform mass sharing.
    FixedShare,
}

impl core::fmt::Display for RuleKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let name = match self {
            RuleKind::Ewa => "ewa",
            RuleKind::Specialist => "specialist",
            RuleKind::FixedShare => "fixed-share",
        };
        write!(f, "{name}")
    }
}

// ---------------------------------------------------------------------------
// Regret bookkeeping
// ---------------------------------------------------------------------------

/// Running per-expert regret of a rule: for each expert, the cumulative
/// difference between the rule's loss and the expert's loss over the rounds
/// in which that expert was active.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretLedger {
    cumulative: Vec<f64>,
}

impl RegretLedger {
    /// Ledger for `n` experts, all regrets zero.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        Ok(RegretLedger { cumulative: vec![0.0; n] })
    }

    /// Adds one round: every active expert `j` gains
    /// `rule_loss - expert_losses[j]`; sleeping experts are unchanged.
    pub fn record(
        &mut self,
        active: &ActiveSet,
        expert_losses: &[f64],
        rule_loss: f64,
    ) -> Result<()> {
        if active.expert_count() != self.cumulative.len() {
            return Err(Error::LengthMismatch {
                expected: self.cumulative.len(),
                got: active.expert_count(),
            });
        }
        if expert_losses.len() != self.cumulative.len() {
            return Err(Error::LengthMismatch {
                expected: self.cumulative.len(),
                got: expert_losses.len(),
            });
        }
        if !rule_loss.is_finite() {
            return Err(Error::InvalidParameter("rule loss must be finite"));
        }
        for j in active.iter() {
            if !expert_losses[j].is_finite() {
                return Err(Error::InvalidParameter("expert losses must be finite on the active set"));
            }
        }
        for j in active.iter() {
            self.cumulative[j] += rule_loss - expert_losses[j];
        }
        Ok(())
    }

    /// Cumulative regret against expert `j`.
    pub fn get(&self, j: usize) -> f64 {
        self.cumulative[j]
    }

    /// All cumulative regrets, indexed by expert.
    pub fn as_slice(&self) -> &[f64] {
        &self.cumulative
    }
}

// ---------------------------------------------------------------------------
// Rule state
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum Core {
    Ewa {
        regrets: RegretLedger,
    },
    Specialist {
        /// Log weights of the full convex vector; mass is conserved.
        log_w: Vec<f64>,
    },
    FixedShare {
        alpha: f64,
        /// Normalized log weights, lazily initialized from the first active
        /// set; `None` until the first update.
        log_w: Option<Vec<f64>>,
        /// Log of the total unnormalized mass, tracked so the raw weights of
        /// the mixture interpretation remain observable.
        log_scale: f64,
    },
}

/// State of one aggregation rule over a fixed expert population.
///
/// Drive it once per round with [`RuleState::step`], or split the round into
/// [`RuleState::predict`] and [`RuleState::update_with_losses`] when the
/// losses come from elsewhere than the round's own forecasts.
#[derive(Debug, Clone)]
pub struct RuleState {
    loss: LossSpec,
    eta: f64,
    gradient: bool,
    prior: WeightVector,
    log_prior: Vec<f64>,
    rounds_seen: usize,
    core: Core,
}

fn validate_eta(eta: f64) -> Result<()> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidParameter("learning rate must be positive and finite"));
    }
    Ok(())
}

fn log_of_prior(prior: &WeightVector) -> Vec<f64> {
    prior.as_slice().iter().map(|&p| ln(p)).collect()
}

impl RuleState {
    /// Exponentially weighted averaging with learning rate `eta` and the
    /// given prior over experts.
    pub fn ewa(loss: LossSpec, eta: f64, prior: WeightVector) -> Result<Self> {
        validate_eta(eta)?;
        let regrets = RegretLedger::new(prior.len())?;
        let log_prior = log_of_prior(&prior);
        Ok(RuleState {
            loss,
            eta,
            gradient: false,
            prior,
            log_prior,
            rounds_seen: 0,
            core: Core::Ewa { regrets },
        })
    }

    /// Specialist rule with learning rate `eta`; the prior is the initial
    /// weight vector.
    pub fn specialist(loss: LossSpec, eta: f64, prior: WeightVector) -> Result<Self> {
        validate_eta(eta)?;
        let log_prior = log_of_prior(&prior);
        let log_w = log_prior.clone();
        Ok(RuleState {
            loss,
            eta,
            gradient: false,
            prior,
            log_prior,
            rounds_seen: 0,
            core: Core::Specialist { log_w },
        })
    }

    /// Fixed-share rule with learning rate `eta` and share rate `alpha` in
    /// `[0, 1]`. The initial weights are the prior restricted to the first
    /// round's active set and renormalized.
    pub fn fixed_share(loss: LossSpec, eta: f64, alpha: f64, prior: WeightVector) -> Result<Self> {
        validate_eta(eta)?;
        if !(alpha.is_finite() && (0.0..=1.0).contains(&alpha)) {
            return Err(Error::InvalidParameter("share rate must lie in [0, 1]"));
        }
        let log_prior = log_of_prior(&prior);
        Ok(RuleState {
            loss,
            eta,
            gradient: false,
            prior,
            log_prior,
            rounds_seen: 0,
            core: Core::FixedShare { alpha, log_w: None, log_scale: 0.0 },
        })
    }

    /// Switches the state to the gradient variant: updates consume the
    /// linearized loss instead of each expert's own loss. Idempotent, and
    /// only meaningful before the first round.
    pub fn gradientize(mut self) -> Self {
        self.gradient = true;
        self
    }

    /// Which update family this state runs.
    pub fn kind(&self) -> RuleKind {
        match self.core {
            Core::Ewa { .. } => RuleKind::Ewa,
            Core::Specialist { .. } => RuleKind::Specialist,
            Core::FixedShare { .. } => RuleKind::FixedShare,
        }
    }

    /// Learning rate.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Share rate, for the fixed-share family.
    pub fn alpha(&self) -> Option<f64> {
        match self.core {
            Core::FixedShare { alpha, .. } => Some(alpha),
            _ => None,
        }
    }

    /// Whether updates use the linearized loss.
    pub fn is_gradient(&self) -> bool {
        self.gradient
    }

    /// Loss the rule is driven by.
    pub fn loss(&self) -> LossSpec {
        self.loss
    }

    /// Prior over experts.
    pub fn prior(&self) -> &WeightVector {
        &self.prior
    }

    /// Number of experts.
    pub fn expert_count(&self) -> usize {
        self.prior.len()
    }

    /// Rounds processed so far.
    pub fn rounds_seen(&self) -> usize {
        self.rounds_seen
    }

    /// Cumulative regrets driving the weights, for the exponentially
    /// weighted family.
    pub fn cumulative_regrets(&self) -> Option<&[f64]> {
        match &self.core {
            Core::Ewa { regrets } => Some(regrets.as_slice()),
            _ => None,
        }
    }

    /// Log of the unnormalized weight vector for the weight-carrying
    /// families. For fixed share the total mass decays as losses accrue,
    /// which is what makes the mixture-over-expert-sequences reading of the
    /// rule observable; for the specialist rule mass is conserved.
    pub fn unnormalized_log_weights(&self) -> Option<Vec<f64>> {
        match &self.core {
            Core::Ewa { .. } => None,
            Core::Specialist { log_w } => Some(log_w.clone()),
            Core::FixedShare { log_w, log_scale, .. } => {
                log_w.as_ref().map(|w| w.iter().map(|&v| v + log_scale).collect())
            }
        }
    }

    /// Normalized log weights for the weight-carrying families; `None` for
    /// the regret-driven family and for a fixed-share state that has not yet
    /// seen its first active set.
    pub(crate) fn normalized_log_weights(&self) -> Option<&[f64]> {
        match &self.core {
            Core::Ewa { .. } => None,
            Core::Specialist { log_w } => Some(log_w),
            Core::FixedShare { log_w, .. } => log_w.as_deref(),
        }
    }

    /// Weights the rule would play against `active`, as a convex vector over
    /// the full population with zeros outside the set.
    pub fn predict(&self, active: &ActiveSet) -> Result<WeightVector> {
        if active.expert_count() != self.expert_count() {
            return Err(Error::LengthMismatch {
                expected: self.expert_count(),
                got: active.expert_count(),
            });
        }
        match &self.core {
            Core::Ewa { regrets } => {
                let scores: Vec<f64> =
                    active.iter().map(|j| self.log_prior[j] + self.eta * regrets.get(j)).collect();
                softmax_on(active, &scores, self.expert_count())
            }
            Core::Specialist { log_w } => {
                let scores: Vec<f64> = active.iter().map(|j| log_w[j]).collect();
                softmax_on(active, &scores, self.expert_count())
            }
            Core::FixedShare { log_w, .. } => match log_w {
                None => {
                    // First round: prior conditioned on the first active set.
                    let scores: Vec<f64> = active.iter().map(|j| self.log_prior[j]).collect();
                    softmax_on(active, &scores, self.expert_count())
                }
                Some(log_w) => {
                    check_support(log_w, active)?;
                    let scores: Vec<f64> = active.iter().map(|j| log_w[j]).collect();
                    softmax_on(active, &scores, self.expert_count())
                }
            },
        }
    }

    /// Advances one round from explicit losses instead of the round's
    /// forecasts.
    ///
    /// `expert_losses` is indexed by expert and read only on the active set.
    /// `rule_loss` is the loss of the rule's own prediction this round; only
    /// the exponentially weighted family consumes it. The fixed-share family
    /// requires `next_active`, the set of experts active in the following
    /// round (pass the current set on the final round); the other families
    /// ignore it.
    pub fn update_with_losses(
        &mut self,
        active: &ActiveSet,
        expert_losses: &[f64],
        rule_loss: f64,
        next_active: Option<&ActiveSet>,
    ) -> Result<()> {
        let n = self.expert_count();
        if active.expert_count() != n {
            return Err(Error::LengthMismatch { expected: n, got: active.expert_count() });
        }
        if expert_losses.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: expert_losses.len() });
        }
        for j in active.iter() {
            if !expert_losses[j].is_finite() {
                return Err(Error::InvalidParameter("expert losses must be finite on the active set"));
            }
        }
        match &mut self.core {
            Core::Ewa { regrets } => {
                regrets.record(active, expert_losses, rule_loss)?;
            }
            Core::Specialist { log_w } => {
                let before: Vec<f64> = active.iter().map(|j| log_w[j]).collect();
                let mass_before = log_sum_exp(&before);
                if mass_before == f64::NEG_INFINITY {
                    return Err(Error::NoActiveMass);
                }
                let decayed: Vec<f64> = active
                    .iter()
                    .map(|j| log_w[j] - self.eta * expert_losses[j])
                    .collect();
                let mass_after = log_sum_exp(&decayed);
                for (idx, j) in active.iter().enumerate() {
                    log_w[j] = decayed[idx] + mass_before - mass_after;
                }
                // The vector is convex up to rounding; re-pin the total mass.
                let total = log_sum_exp(log_w);
                for w in log_w.iter_mut() {
                    *w -= total;
                }
            }
            Core::FixedShare { alpha, log_w, log_scale } => {
                let next = next_active.ok_or(Error::MissingNextActiveSet)?;
                if next.expert_count() != n {
                    return Err(Error::LengthMismatch { expected: n, got: next.expert_count() });
                }
                let state = match log_w {
                    Some(w) => w,
                    None => {
                        let mut init = vec![f64::NEG_INFINITY; n];
                        let scores: Vec<f64> =
                            active.iter().map(|j| self.log_prior[j]).collect();
                        let mass = log_sum_exp(&scores);
                        if mass == f64::NEG_INFINITY {
                            return Err(Error::NoActiveMass);
                        }
                        for j in active.iter() {
                            init[j] = self.log_prior[j] - mass;
                        }
                        *log_w = Some(init);
                        log_w.as_mut().unwrap()
                    }
                };
                check_support(state, active)?;

                // Loss step: v_i = w_i * e^{-eta * loss_i} on the active set.
                let mut v = vec![f64::NEG_INFINITY; n];
                for j in active.iter() {
                    v[j] = state[j] - self.eta * expert_losses[j];
                }

                let (updated, total) = share_mass(&v, active, next, *alpha)?;
                *state = updated;
                *log_scale += total;
            }
        }
        self.rounds_seen += 1;
        Ok(())
    }

    /// Runs one full round: predicts against the round's active set, scores
    /// the prediction against the observation, updates, and returns the
    /// weights that were played.
    ///
    /// `next_active` is the following round's active set, needed by the
    /// fixed-share family; pass the current set on the final round.
    pub fn step(
        &mut self,
        round: &ForecastRound,
        next_active: Option<&ActiveSet>,
    ) -> Result<WeightVector> {
        let weights = self.predict(round.active())?;
        let y = round.observation_or_err()?;
        let prediction = aggregate_prediction(&weights, round)?;
        let n = self.expert_count();
        let mut expert_losses = vec![0.0; n];
        let rule_loss;
        if self.gradient {
            let slope = self.loss.derivative(prediction, y)?;
            for j in round.active().iter() {
                expert_losses[j] = slope * round.forecast(j).unwrap_or(0.0);
            }
            rule_loss = slope * prediction;
        } else {
            for j in round.active().iter() {
                expert_losses[j] = self.loss.eval(round.forecast(j).unwrap_or(0.0), y)?;
            }
            rule_loss = self.loss.eval(prediction, y)?;
        }
        self.update_with_losses(round.active(), &expert_losses, rule_loss, next_active)?;
        Ok(weights)
    }
}

/// Softmax of `scores` (aligned with `active`'s members) embedded into a
/// full-length convex vector.
pub(crate) fn softmax_on(active: &ActiveSet, scores: &[f64], n: usize) -> Result<WeightVector> {
    let total = log_sum_exp(scores);
    if total == f64::NEG_INFINITY {
        return Err(Error::NoActiveMass);
    }
    let mut weights = vec![0.0; n];
    for (idx, j) in active.iter().enumerate() {
        weights[j] = crate::numeric::exp(scores[idx] - total);
    }
    WeightVector::new(weights)
}

/// The fixed-share redistribution, in log space.
///
/// `v` holds the log masses sitting on `active` (negative infinity
/// elsewhere). Mass of experts falling asleep is split uniformly over
/// `next`; experts staying awake donate an `alpha` fraction of theirs to the
/// same uniform pool and keep the rest. Returns the resulting log weights
/// normalized over `next`, together with the log of the total mass (which
/// the redistribution itself conserves).
pub(crate) fn share_mass(
    v: &[f64],
    active: &ActiveSet,
    next: &ActiveSet,
    alpha: f64,
) -> Result<(Vec<f64>, f64)> {
    let leaving: Vec<f64> =
        active.iter().filter(|&j| !next.contains(j)).map(|j| v[j]).collect();
    let staying: Vec<f64> =
        active.iter().filter(|&j| next.contains(j)).map(|j| v[j]).collect();
    let log_leave = log_sum_exp(&leaving);
    let log_stay = log_sum_exp(&staying);

    let ln_next = ln(next.len() as f64);
    let ln_alpha = ln(alpha);
    let ln_keep = ln(1.0 - alpha);

    let mut updated = vec![f64::NEG_INFINITY; v.len()];
    for j in next.iter() {
        let shared_from_leavers = log_leave - ln_next;
        let shared_from_stayers = ln_alpha + log_stay - ln_next;
        let kept = if active.contains(j) { ln_keep + v[j] } else { f64::NEG_INFINITY };
        updated[j] = log_sum_exp(&[shared_from_leavers, shared_from_stayers, kept]);
    }

    let total = log_sum_exp(&updated);
    if total == f64::NEG_INFINITY {
        return Err(Error::NoActiveMass);
    }
    for j in next.iter() {
        updated[j] -= total;
    }
    Ok((updated, total))
}

/// Fails when `log_w` carries mass on an expert outside `active`.
pub(crate) fn check_support(log_w: &[f64], active: &ActiveSet) -> Result<()> {
    for (j, &w) in log_w.iter().enumerate() {
        if w > f64::NEG_INFINITY && !active.contains(j) {
            return Err(Error::MassOffActiveSet);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Regret evaluation
// ---------------------------------------------------------------------------

/// Cumulative regret of played weights against a single expert: the summed
/// loss difference over the rounds where that expert was active.
pub fn regret_vs_expert(
    history: &[(WeightVector, ForecastRound)],
    expert: ExpertId,
    loss: LossSpec,
) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = history[0].1.expert_count();
    if expert.0 >= n {
        return Err(Error::ExpertOutOfRange { expert: expert.0, count: n });
    }
    let mut regret = 0.0;
    for (weights, round) in history {
        if !round.active().contains(expert.0) {
            continue;
        }
        let y = round.observation_or_err()?;
        let rule_loss = loss.eval(aggregate_prediction(weights, round)?, y)?;
        let expert_loss = loss.eval(round.forecast(expert.0).unwrap_or(0.0), y)?;
        regret += rule_loss - expert_loss;
    }
    Ok(regret)
}

/// Cumulative regret of played weights against a fixed convex vector `q`:
/// each round contributes the loss difference against `q` conditioned on the
/// active set, scaled by the mass `q` puts on that set. Rounds where `q`
/// sleeps entirely contribute nothing.
pub fn regret_vs_convex(
    history: &[(WeightVector, ForecastRound)],
    q: &WeightVector,
    loss: LossSpec,
) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut regret = 0.0;
    for (weights, round) in history {
        let mass = q.mass_on(round.active());
        if mass <= 0.0 {
            continue;
        }
        let y = round.observation_or_err()?;
        let rule_loss = loss.eval(aggregate_prediction(weights, round)?, y)?;
        let conditioned = condition(q, round.active())?;
        let mut q_prediction = 0.0;
        for j in round.active().iter() {
            q_prediction += conditioned.as_slice()[j] * round.forecast(j).unwrap_or(0.0);
        }
        regret += mass * (rule_loss - loss.eval(q_prediction, y)?);
    }
    Ok(regret)
}

/// Learning rate minimizing the worst-case regret bound over a known
/// horizon, for the families with a closed-form optimum.
///
/// Plain variants tune against the loss range `bounds.l`; gradient variants
/// tune against the gradient bound `bounds.g`. The fixed-share family has no
/// closed form (its optimum depends on the switch budget) and is rejected.
pub fn theoretical_optimal_eta(
    kind: RuleKind,
    gradient: bool,
    n: usize,
    horizon: usize,
    bounds: &Bounds,
) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter("closed-form tuning requires at least two experts"));
    }
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be positive"));
    }
    let ln_n = ln(n as f64);
    let t = horizon as f64;
    let eta = match (kind, gradient) {
        (RuleKind::Ewa, false) => sqrt(2.0 * ln_n / (bounds.l * bounds.l * t)),
        (RuleKind::Specialist, false) => sqrt(8.0 * ln_n / (bounds.l * bounds.l * t)),
        (RuleKind::Ewa, true) => sqrt(ln_n / (2.0 * bounds.g * bounds.g * t)),
        (RuleKind::Specialist, true) => sqrt(2.0 * ln_n / (bounds.g * bounds.g * t)),
        (RuleKind::FixedShare, _) => {
            return Err(Error::InvalidParameter("no closed-form tuning for the fixed-share rule"));
        }
    };
    Ok(eta)
}
