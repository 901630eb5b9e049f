//! Domain types shared by every rule and oracle.
//!
//! A forecasting problem is a sequence of rounds. In each round a subset of
//! the experts is active and announces forecasts; an aggregation rule turns a
//! convex weight vector over the active experts into a single prediction, and
//! afterwards the observation is revealed. The types here enforce the
//! invariants the algorithms rely on: active sets are non-empty, forecasts
//! are finite exactly on the active experts, and weight vectors are convex.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Tolerance for the mass of a user-supplied weight vector. Vectors whose
/// entries sum to within this distance of one are accepted and renormalized;
/// anything further off is rejected.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Index of an expert, `0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExpertId(pub usize);

impl fmt::Display for ExpertId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

// ---------------------------------------------------------------------------
// Active sets
// ---------------------------------------------------------------------------

/// Non-empty set of experts active in one round, out of a fixed population.
///
/// Members are stored sorted and deduplicated, so iteration order is the
/// expert index order and equality is set equality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    expert_count: usize,
    members: Vec<usize>,
}

impl ActiveSet {
    /// Builds an active set over `expert_count` experts.
    ///
    /// Fails when `members` is empty or contains an index `>= expert_count`.
    /// Duplicates are collapsed.
    pub fn new(expert_count: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut members: Vec<usize> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if members.is_empty() {
            return Err(Error::EmptyActiveSet);
        }
        if let Some(&last) = members.last() {
            if last >= expert_count {
                return Err(Error::ExpertOutOfRange { expert: last, count: expert_count });
            }
        }
        Ok(ActiveSet { expert_count, members })
    }

    /// Active set in which every expert participates.
    pub fn full(expert_count: usize) -> Result<Self> {
        ActiveSet::new(expert_count, 0..expert_count)
    }

    /// Size of the underlying expert population.
    pub fn expert_count(&self) -> usize {
        self.expert_count
    }

    /// Number of active experts.
    pub fn len(&self) -> usize {
        self.members.len()
    }

    /// Active sets are never empty; provided for completeness.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Whether expert `j` is active.
    pub fn contains(&self, j: usize) -> bool {
        self.members.binary_search(&j).is_ok()
    }

    /// Active expert indices in increasing order.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// Iterator over active expert indices in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }
}

// ---------------------------------------------------------------------------
// Weight vectors
// ---------------------------------------------------------------------------

/// Convex weight vector over the full expert population.
///
/// Entries are non-negative, finite, and sum to one. Construction accepts a
/// total mass within [`WEIGHT_SUM_TOLERANCE`] of one and renormalizes, so
/// downstream consumers can rely on the exact-sum invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    /// Validates and renormalizes `weights`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidWeights("weight vector must be non-empty"));
        }
        let mut sum = 0.0;
        for &w in &weights {
            if !w.is_finite() {
                return Err(Error::InvalidWeights("entries must be finite"));
            }
            if w < 0.0 {
                return Err(Error::InvalidWeights("entries must be non-negative"));
            }
            sum += w;
        }
        if !(sum - 1.0).abs().le(&WEIGHT_SUM_TOLERANCE) {
            return Err(Error::InvalidWeights("entries must sum to one"));
        }
        let mut weights = weights;
        if sum != 1.0 {
            for w in &mut weights {
                *w /= sum;
            }
        }
        Ok(WeightVector { weights })
    }

    /// Uniform vector `(1/n, ..., 1/n)`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidWeights("weight vector must be non-empty"));
        }
        Ok(WeightVector { weights: alloc::vec![1.0 / n as f64; n] })
    }

    /// Unit mass on expert `j`.
    pub fn dirac(n: usize, j: usize) -> Result<Self> {
        if j >= n {
            return Err(Error::ExpertOutOfRange { expert: j, count: n });
        }
        let mut weights = alloc::vec![0.0; n];
        weights[j] = 1.0;
        Ok(WeightVector { weights })
    }

    /// Number of experts.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    /// Weight vectors are never empty; provided for completeness.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Weight of expert `j`.
    pub fn get(&self, j: usize) -> f64 {
        self.weights[j]
    }

    /// All weights, indexed by expert.
    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    /// Total mass the vector puts on `active`.
    pub fn mass_on(&self, active: &ActiveSet) -> f64 {
        active.iter().map(|j| self.weights[j]).sum()
    }

    /// Whether all mass lies inside `active`.
    pub fn supported_on(&self, active: &ActiveSet) -> bool {
        self.weights
            .iter()
            .enumerate()
            .all(|(j, &w)| w == 0.0 || active.contains(j))
    }
}

/// Restriction of a weight vector to an active set.
///
/// Either the zero vector (when the base vector puts no mass on the set) or a
/// convex vector supported on the set; [`ConditionedVector::is_zero`]
/// distinguishes the two.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedVector {
    entries: Vec<f64>,
    zero: bool,
}

impl ConditionedVector {
    /// Entries indexed by expert; zero outside the active set.
    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    /// True when the base vector put no mass on the active set.
    pub fn is_zero(&self) -> bool {
        self.zero
    }
}

/// Conditions `base` on `active`: restricts to the set and renormalizes, or
/// returns the zero vector when the restricted mass is zero.
pub fn condition(base: &WeightVector, active: &ActiveSet) -> Result<ConditionedVector> {
    if base.len() != active.expert_count() {
        return Err(Error::LengthMismatch { expected: active.expert_count(), got: base.len() });
    }
    let mass = base.mass_on(active);
    let mut entries = alloc::vec![0.0; base.len()];
    if mass <= 0.0 {
        return Ok(ConditionedVector { entries, zero: true });
    }
    for j in active.iter() {
        entries[j] = base.get(j) / mass;
    }
    Ok(ConditionedVector { entries, zero: false })
}

// ---------------------------------------------------------------------------
// Rounds
// ---------------------------------------------------------------------------

/// One forecasting round: the active experts, their forecasts, and (once
/// revealed) the observation.
///
/// Forecasts are stored for the full population but are meaningful exactly on
/// the active set; [`ForecastRound::forecast`] returns `None` elsewhere.
#[derive(Debug, Clone)]
pub struct ForecastRound {
    t: usize,
    active: ActiveSet,
    forecasts: Vec<f64>,
    observation: Option<f64>,
}

impl ForecastRound {
    /// Builds a round. `forecasts` is indexed by expert; entries outside the
    /// active set are ignored. Fails when an active expert's forecast is
    /// missing (out of range) or not finite, or when `t` is zero.
    pub fn new(t: usize, active: ActiveSet, forecasts: Vec<f64>) -> Result<Self> {
        if t == 0 {
            return Err(Error::InvalidParameter("round index starts at one"));
        }
        if forecasts.len() != active.expert_count() {
            return Err(Error::LengthMismatch {
                expected: active.expert_count(),
                got: forecasts.len(),
            });
        }
        for j in active.iter() {
            if !forecasts[j].is_finite() {
                return Err(Error::InvalidForecast { expert: j });
            }
        }
        Ok(ForecastRound { t, active, forecasts, observation: None })
    }

    /// Same round with the observation attached.
    pub fn with_observation(mut self, y: f64) -> Result<Self> {
        if !y.is_finite() {
            return Err(Error::InvalidParameter("observation must be finite"));
        }
        self.observation = Some(y);
        Ok(self)
    }

    /// One-based round index.
    pub fn t(&self) -> usize {
        self.t
    }

    /// Experts active this round.
    pub fn active(&self) -> &ActiveSet {
        &self.active
    }

    /// Forecast of expert `j`, defined exactly on the active set.
    pub fn forecast(&self, j: usize) -> Option<f64> {
        if self.active.contains(j) {
            Some(self.forecasts[j])
        } else {
            None
        }
    }

    /// The revealed observation, if any.
    pub fn observation(&self) -> Option<f64> {
        self.observation
    }

    /// The observation, or an error when it has not been revealed.
    pub fn observation_or_err(&self) -> Result<f64> {
        self.observation.ok_or(Error::MissingObservation)
    }

    /// Number of experts in the population.
    pub fn expert_count(&self) -> usize {
        self.active.expert_count()
    }
}

/// Combines active-expert forecasts under a convex weight vector.
///
/// Fails when the weights carry mass outside the round's active set, since
/// that mass would multiply forecasts that do not exist.
pub fn aggregate_prediction(weights: &WeightVector, round: &ForecastRound) -> Result<f64> {
    if weights.len() != round.expert_count() {
        return Err(Error::LengthMismatch { expected: round.expert_count(), got: weights.len() });
    }
    if !weights.supported_on(round.active()) {
        return Err(Error::MassOffActiveSet);
    }
    let mut prediction = 0.0;
    for j in round.active().iter() {
        prediction += weights.get(j) * round.forecasts[j];
    }
    Ok(prediction)
}

// ---------------------------------------------------------------------------
// Problem bounds
// ---------------------------------------------------------------------------

/// Scale constants of a forecasting problem: `b` bounds observations and
/// forecasts, `l` bounds losses, and `g` bounds the loss gradient entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    /// Range of observations and forecasts, `[0, b]`.
    pub b: f64,
    /// Range of per-round losses, `[0, l]`.
    pub l: f64,
    /// Bound on the magnitude of loss-gradient entries.
    pub g: f64,
}

impl Bounds {
    /// Explicit bounds; all three must be positive and finite.
    pub fn new(b: f64, l: f64, g: f64) -> Result<Self> {
        for (v, name) in [
            (b, "bounds require b > 0"),
            (l, "bounds require l > 0"),
            (g, "bounds require g > 0"),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(name));
            }
        }
        Ok(Bounds { b, l, g })
    }

    /// Bounds induced by the square loss on predictions and observations in
    /// `[0, b]`: losses lie in `[0, b^2]` and gradient entries in
    /// `[-2 b^2, 2 b^2]`.
    pub fn for_square_loss(b: f64) -> Result<Self> {
        Bounds::new(b, b * b, 2.0 * b * b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn active_set_sorts_and_dedups() {
        let set = ActiveSet::new(5, [3, 1, 3, 0]).unwrap();
        assert_eq!(set.members(), &[0, 1, 3]);
        assert_eq!(set.len(), 3);
        assert!(set.contains(1));
        assert!(!set.contains(2));
    }

    #[test]
    fn active_set_rejects_empty_and_out_of_range() {
        assert_eq!(ActiveSet::new(3, []).unwrap_err(), Error::EmptyActiveSet);
        assert_eq!(
            ActiveSet::new(3, [3]).unwrap_err(),
            Error::ExpertOutOfRange { expert: 3, count: 3 }
        );
    }

    #[test]
    fn weight_vector_renormalizes_within_tolerance() {
        let w = WeightVector::new(vec![0.5, 0.5 + 5e-10]).unwrap();
        let total: f64 = w.as_slice().iter().sum();
        assert_eq!(total, 1.0);
    }

    #[test]
    fn weight_vector_rejects_bad_mass_and_sign() {
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![-0.1, 1.1]).is_err());
        assert!(WeightVector::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn conditioning_restricts_and_renormalizes() {
        let q = WeightVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let active = ActiveSet::new(3, [0, 2]).unwrap();
        let c = condition(&q, &active).unwrap();
        assert!(!c.is_zero());
        let e = c.as_slice();
        assert!((e[0] - 0.2 / 0.7).abs() < 1e-15);
        assert_eq!(e[1], 0.0);
        assert!((e[2] - 0.5 / 0.7).abs() < 1e-15);
    }

    #[test]
    fn conditioning_on_zero_mass_gives_zero_vector() {
        let q = WeightVector::dirac(3, 1).unwrap();
        let active = ActiveSet::new(3, [0, 2]).unwrap();
        let c = condition(&q, &active).unwrap();
        assert!(c.is_zero());
        assert!(c.as_slice().iter().all(|&e| e == 0.0));
    }

    #[test]
    fn aggregate_prediction_weights_active_forecasts() {
        let active = ActiveSet::new(3, [0, 2]).unwrap();
        let round = ForecastRound::new(1, active, vec![10.0, f64::NAN, 20.0]).unwrap();
        let w = WeightVector::new(vec![0.25, 0.0, 0.75]).unwrap();
        let pred = aggregate_prediction(&w, &round).unwrap();
        assert!((pred - 17.5).abs() < 1e-12);
    }

    #[test]
    fn aggregate_prediction_rejects_mass_off_active() {
        let active = ActiveSet::new(2, [0]).unwrap();
        let round = ForecastRound::new(1, active, vec![1.0, 2.0]).unwrap();
        let w = WeightVector::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(aggregate_prediction(&w, &round).unwrap_err(), Error::MassOffActiveSet);
    }

    #[test]
    fn forecast_round_hides_inactive_forecasts() {
        let active = ActiveSet::new(2, [1]).unwrap();
        let round = ForecastRound::new(4, active, vec![9.0, 2.0]).unwrap();
        assert_eq!(round.forecast(0), None);
        assert_eq!(round.forecast(1), Some(2.0));
    }

    #[test]
    fn forecast_round_rejects_non_finite_active_forecast() {
        let active = ActiveSet::new(2, [0, 1]).unwrap();
        assert_eq!(
            ForecastRound::new(1, active, vec![1.0, f64::INFINITY]).unwrap_err(),
            Error::InvalidForecast { expert: 1 }
        );
    }

    #[test]
    fn square_loss_bounds_scale_quadratically() {
        let b = Bounds::for_square_loss(1020.0).unwrap();
        assert_eq!(b.l, 1020.0 * 1020.0);
        assert_eq!(b.g, 2.0 * 1020.0 * 1020.0);
    }
}
