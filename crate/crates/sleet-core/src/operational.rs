//! Block-frozen variants of the aggregation rules.
//!
//! A deployed forecaster often has to commit to its mixing weights for a
//! whole block of rounds (say, one day of half-hourly slots) because the
//! inputs needed to update them arrive with a delay. The wrappers here run
//! the base rule internally on every round but expose weights that refresh
//! only on block boundaries:
//!
//! * the exponentially weighted family freezes the regret vector at the last
//!   boundary and applies the current round's activity to it;
//! * the specialist family freezes the weight vector and conditions it on
//!   each round's active set;
//! * the fixed-share family freezes at boundaries too, but between them it
//!   keeps applying the share-only part of its update so that experts waking
//!   up mid-block still receive mass.
//!
//! With a block size of one every wrapper degenerates to its base rule.
//!
//! The distance between the frozen and the up-to-date weights is bounded:
//! within a block the per-expert weight ratio of the frozen exponentially
//! weighted rule to its base stays inside
//! [`weight_ratio_envelope`]`(..)^{-1}` .. [`weight_ratio_envelope`]`(..)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::numeric::{abs, exp};
use crate::rules::{check_support, share_mass, softmax_on, RuleKind, RuleState};
use crate::types::{ActiveSet, ForecastRound, WeightVector};

// ---------------------------------------------------------------------------
// Group priors
// ---------------------------------------------------------------------------

/// A partition of the expert population into groups (for example one group
/// per forecasting method, with one expert per parameterization).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpertGroups {
    expert_count: usize,
    groups: Vec<Vec<usize>>,
}

impl ExpertGroups {
    /// Validates that `groups` partitions `0..expert_count`: every group
    /// non-empty, no index repeated or out of range, all experts covered.
    pub fn new(expert_count: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut seen = vec![false; expert_count];
        let mut covered = 0usize;
        for group in &groups {
            if group.is_empty() {
                return Err(Error::InvalidParameter("groups must be non-empty"));
            }
            for &j in group {
                if j >= expert_count {
                    return Err(Error::ExpertOutOfRange { expert: j, count: expert_count });
                }
                if seen[j] {
                    return Err(Error::InvalidParameter("groups must be disjoint"));
                }
                seen[j] = true;
                covered += 1;
            }
        }
        if covered != expert_count {
            return Err(Error::InvalidParameter("groups must cover every expert"));
        }
        Ok(ExpertGroups { expert_count, groups })
    }

    /// Builds consecutive groups of the given sizes: the first `sizes[0]`
    /// experts, the next `sizes[1]`, and so on.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let expert_count = sizes.iter().sum();
        let mut groups = Vec::with_capacity(sizes.len());
        let mut start = 0usize;
        for &s in sizes {
            groups.push((start..start + s).collect());
            start += s;
        }
        ExpertGroups::new(expert_count, groups)
    }

    /// Number of groups.
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    /// Groups are validated non-empty; provided for completeness.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Size of the expert population.
    pub fn expert_count(&self) -> usize {
        self.expert_count
    }

    /// The groups themselves.
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }
}

/// Prior that weights groups equally rather than experts: each group gets
/// mass `1/G`, split uniformly among its members. This keeps a method with
/// many parameterizations from dominating the prior by head count.
pub fn make_prior(groups: &ExpertGroups) -> WeightVector {
    let g = groups.len() as f64;
    let mut weights = vec![0.0; groups.expert_count()];
    for group in groups.groups() {
        let share = 1.0 / (g * group.len() as f64);
        for &j in group {
            weights[j] = share;
        }
    }
    // Partition structure guarantees mass exactly one up to rounding.
    WeightVector::new(weights).expect("partition prior is convex")
}

// ---------------------------------------------------------------------------
// Block-frozen state
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum Frozen {
    /// Regret vector of the base rule at the last boundary.
    Regrets(Vec<f64>),
    /// Specialist weight vector at the last boundary (normalized logs).
    Weights(Vec<f64>),
    /// Fixed-share vector, share-updated between boundaries. `None` until
    /// the first active set is seen.
    Shared(Option<Vec<f64>>),
}

/// A base rule wrapped so its exposed weights refresh only every
/// `block_size` rounds.
#[derive(Debug, Clone)]
pub struct OperationalState {
    block_size: usize,
    inner: RuleState,
    frozen: Frozen,
    rounds_seen: usize,
}

/// Parameters of a block-frozen rule, buildable in one call.
#[derive(Debug, Clone)]
pub struct OperationalConfig {
    /// Rounds per block; the exposed weights refresh after every
    /// `block_size`-th round.
    pub block_size: usize,
    /// Base update family.
    pub kind: RuleKind,
    /// Loss driving the base rule.
    pub loss: LossSpec,
    /// Learning rate of the base rule.
    pub eta: f64,
    /// Share rate; required exactly for the fixed-share family.
    pub alpha: Option<f64>,
    /// Whether the base rule runs in gradient mode.
    pub gradient: bool,
    /// Prior over experts.
    pub prior: WeightVector,
}

impl OperationalConfig {
    /// Builds the wrapped state.
    pub fn build(&self) -> Result<OperationalState> {
        let base = match (self.kind, self.alpha) {
            (RuleKind::FixedShare, Some(alpha)) => {
                RuleState::fixed_share(self.loss, self.eta, alpha, self.prior.clone())?
            }
            (RuleKind::FixedShare, None) => {
                return Err(Error::InvalidParameter("fixed share requires a share rate"));
            }
            (_, Some(_)) => {
                return Err(Error::InvalidParameter(
                    "share rate only applies to the fixed-share family",
                ));
            }
            (RuleKind::Ewa, None) => RuleState::ewa(self.loss, self.eta, self.prior.clone())?,
            (RuleKind::Specialist, None) => {
                RuleState::specialist(self.loss, self.eta, self.prior.clone())?
            }
        };
        let base = if self.gradient { base.gradientize() } else { base };
        OperationalState::new(self.block_size, base)
    }
}

impl OperationalState {
    /// Wraps a fresh base rule. Fails when the base has already processed
    /// rounds (its history would predate the first boundary) or when
    /// `block_size` is zero.
    pub fn new(block_size: usize, base: RuleState) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::InvalidParameter("block size must be positive"));
        }
        if base.rounds_seen() > 0 {
            return Err(Error::StateAlreadyStarted);
        }
        let frozen = match base.kind() {
            RuleKind::Ewa => Frozen::Regrets(vec![0.0; base.expert_count()]),
            RuleKind::Specialist => Frozen::Weights(
                base.normalized_log_weights()
                    .expect("specialist state carries weights")
                    .to_vec(),
            ),
            RuleKind::FixedShare => Frozen::Shared(None),
        };
        Ok(OperationalState { block_size, inner: base, frozen, rounds_seen: 0 })
    }

    /// Rounds per block.
    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// The internally advanced base rule.
    pub fn base(&self) -> &RuleState {
        &self.inner
    }

    /// Rounds processed so far.
    pub fn rounds_seen(&self) -> usize {
        self.rounds_seen
    }

    /// Weights played against `active`, formed from the last boundary's
    /// snapshot rather than the base rule's current state.
    pub fn predict(&self, active: &ActiveSet) -> Result<WeightVector> {
        let n = self.inner.expert_count();
        if active.expert_count() != n {
            return Err(Error::LengthMismatch { expected: n, got: active.expert_count() });
        }
        match &self.frozen {
            Frozen::Regrets(regrets) => {
                let prior = self.inner.prior().as_slice();
                let scores: Vec<f64> = active
                    .iter()
                    .map(|j| crate::numeric::ln(prior[j]) + self.inner.eta() * regrets[j])
                    .collect();
                softmax_on(active, &scores, n)
            }
            Frozen::Weights(log_w) => {
                let scores: Vec<f64> = active.iter().map(|j| log_w[j]).collect();
                softmax_on(active, &scores, n)
            }
            Frozen::Shared(carried) => match carried {
                None => self.inner.predict(active),
                Some(log_w) => {
                    check_support(log_w, active)?;
                    let scores: Vec<f64> = active.iter().map(|j| log_w[j]).collect();
                    softmax_on(active, &scores, n)
                }
            },
        }
    }

    /// Runs one round: plays the frozen weights, advances the base rule on
    /// the round, and refreshes the snapshot when the round count hits a
    /// block boundary. Returns the weights that were played.
    pub fn step(
        &mut self,
        round: &ForecastRound,
        next_active: Option<&ActiveSet>,
    ) -> Result<WeightVector> {
        let played = self.predict(round.active())?;

        // Fixed share needs its carried vector materialized before we can
        // share it toward the next round.
        if let Frozen::Shared(carried @ None) = &mut self.frozen {
            let n = self.inner.expert_count();
            let mut init = vec![f64::NEG_INFINITY; n];
            for j in round.active().iter() {
                init[j] = crate::numeric::ln(played.get(j));
            }
            *carried = Some(init);
        }

        self.inner.step(round, next_active)?;
        self.rounds_seen += 1;

        if self.rounds_seen.is_multiple_of(self.block_size) {
            // Boundary: copy the base rule's state into the snapshot.
            match (&mut self.frozen, self.inner.kind()) {
                (Frozen::Regrets(snapshot), RuleKind::Ewa) => {
                    snapshot.copy_from_slice(
                        self.inner.cumulative_regrets().expect("ewa state carries regrets"),
                    );
                }
                (Frozen::Weights(snapshot), RuleKind::Specialist)
                | (Frozen::Shared(Some(snapshot)), RuleKind::FixedShare) => {
                    snapshot.copy_from_slice(
                        self.inner
                            .normalized_log_weights()
                            .expect("weight-carrying state is initialized after a step"),
                    );
                }
                _ => unreachable!("frozen view always matches the base kind"),
            }
        } else if let Frozen::Shared(Some(carried)) = &mut self.frozen {
            // Mid-block: share-only transport of the carried vector onto the
            // next active set, so waking experts get mass without any loss
            // information leaking into the block.
            let next = next_active.ok_or(Error::MissingNextActiveSet)?;
            let alpha = self.inner.alpha().expect("fixed-share state carries a share rate");
            let (shared, _) = share_mass(carried, round.active(), next, alpha)?;
            *carried = shared;
        }
        Ok(played)
    }
}

// ---------------------------------------------------------------------------
// Divergence diagnostics
// ---------------------------------------------------------------------------

/// Largest absolute per-expert difference between two weight trajectories,
/// round by round. Fails when the trajectories are unaligned or empty.
pub fn weight_divergence(base: &[WeightVector], frozen: &[WeightVector]) -> Result<f64> {
    if base.len() != frozen.len() {
        return Err(Error::LengthMismatch { expected: base.len(), got: frozen.len() });
    }
    if base.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut worst = 0.0f64;
    for (b, f) in base.iter().zip(frozen.iter()) {
        if b.len() != f.len() {
            return Err(Error::LengthMismatch { expected: b.len(), got: f.len() });
        }
        for j in 0..b.len() {
            let d = abs(b.get(j) - f.get(j));
            if d > worst {
                worst = d;
            }
        }
    }
    Ok(worst)
}

/// Bound on the per-expert weight ratio between the block-frozen
/// exponentially weighted rule and its base within one block:
/// `exp(2 (block_size - 1) * eta * loss_bound)`.
///
/// The snapshot is at most `block_size - 1` rounds stale, each stale round
/// moves any cumulative regret by at most `loss_bound`, and normalization
/// doubles the exponent. A block size of one gives exactly 1.
pub fn weight_ratio_envelope(block_size: usize, eta: f64, loss_bound: f64) -> Result<f64> {
    if block_size == 0 {
        return Err(Error::InvalidParameter("block size must be positive"));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidParameter("learning rate must be positive and finite"));
    }
    if !(loss_bound.is_finite() && loss_bound > 0.0) {
        return Err(Error::InvalidParameter("loss bound must be positive and finite"));
    }
    Ok(exp(2.0 * (block_size as f64 - 1.0) * eta * loss_bound))
}
