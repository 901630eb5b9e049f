//! Hindsight benchmarks computed on a fully revealed stream.
//!
//! These are the yardsticks a sequential rule is compared against after the
//! fact: the uniform mixture, the best single expert, the best fixed convex
//! weight vector, the best compound expert with a bounded number of shifts,
//! and per-activity-pattern partition benchmarks.
//!
//! Scores follow the loss: root mean loss for the square loss (an RMSE in
//! the observation's units), plain mean loss otherwise. The compound-expert
//! oracle returns a cumulative loss instead, since its minimizer is defined
//! through sums.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::numeric;
use crate::types::{ExpertId, ForecastRound, WeightVector};

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

/// A fully revealed stream: every round carries its observation, all values
/// lie in `[0, bound]`, and round indices strictly increase.
#[derive(Debug, Clone)]
pub struct Dataset {
    rounds: Vec<ForecastRound>,
    expert_count: usize,
    bound: f64,
}

impl Dataset {
    pub fn new(rounds: Vec<ForecastRound>, bound: f64) -> Result<Self> {
        if rounds.is_empty() {
            return Err(Error::EmptyInput);
        }
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(Error::InvalidParameter("bound must be finite and non-negative"));
        }
        let expert_count = rounds[0].expert_count();
        let mut last_t = 0usize;
        for round in &rounds {
            if round.expert_count() != expert_count {
                return Err(Error::LengthMismatch {
                    expected: expert_count,
                    got: round.expert_count(),
                });
            }
            if round.t() <= last_t {
                return Err(Error::InvalidParameter("round indices must strictly increase"));
            }
            last_t = round.t();
            let y = round.observation_or_err()?;
            if !(0.0..=bound).contains(&y) {
                return Err(Error::InvalidParameter("observation outside [0, bound]"));
            }
            for &j in round.active().members() {
                let f = round.forecast(j).expect("active expert has a forecast");
                if !(0.0..=bound).contains(&f) {
                    return Err(Error::InvalidParameter("forecast outside [0, bound]"));
                }
            }
        }
        Ok(Dataset { rounds, expert_count, bound })
    }

    /// Builds a dataset whose bound is the largest forecast or observation
    /// present.
    pub fn with_inferred_bound(rounds: Vec<ForecastRound>) -> Result<Self> {
        let mut bound = 0.0f64;
        for round in &rounds {
            if let Some(y) = round.observation() {
                bound = bound.max(y);
            }
            for &j in round.active().members() {
                bound = bound.max(round.forecast(j).expect("active expert has a forecast"));
            }
        }
        Dataset::new(rounds, bound)
    }

    pub fn rounds(&self) -> &[ForecastRound] {
        &self.rounds
    }

    /// Number of rounds.
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn expert_count(&self) -> usize {
        self.expert_count
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// The first `k` rounds as their own dataset (same bound).
    pub fn prefix(&self, k: usize) -> Result<Dataset> {
        if k == 0 || k > self.rounds.len() {
            return Err(Error::InvalidParameter("prefix length out of range"));
        }
        Ok(Dataset {
            rounds: self.rounds[..k].to_vec(),
            expert_count: self.expert_count,
            bound: self.bound,
        })
    }
}

fn score_from_mean(spec: LossSpec, mean: f64) -> f64 {
    match spec {
        LossSpec::Square => numeric::sqrt(mean),
        _ => mean,
    }
}

// ---------------------------------------------------------------------------
// Uniform and single-expert benchmarks
// ---------------------------------------------------------------------------

/// Score of the rule that plays the plain average of active forecasts.
pub fn uniform_rule(data: &Dataset, spec: LossSpec) -> Result<f64> {
    let mut sum = 0.0;
    for round in data.rounds() {
        let active = round.active();
        let mut pred = 0.0;
        for &j in active.members() {
            pred += round.forecast(j).expect("active expert has a forecast");
        }
        pred /= active.len() as f64;
        sum += spec.eval(pred, round.observation_or_err()?)?;
    }
    Ok(score_from_mean(spec, sum / data.len() as f64))
}

/// Best single expert, scored per active round only. Experts that never wake
/// are excluded; ties go to the lower index.
pub fn best_single_expert(data: &Dataset, spec: LossSpec) -> Result<(ExpertId, f64)> {
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
    let mut best: Option<(usize, f64)> = None;
    for j in 0..n {
        if counts[j] == 0 {
            continue;
        }
        let mean = sums[j] / counts[j] as f64;
        if best.is_none_or(|(_, m)| mean < m) {
            best = Some((j, mean));
        }
    }
    let (j, mean) = best.ok_or(Error::UndefinedScore("no expert is ever active"))?;
    Ok((ExpertId(j), score_from_mean(spec, mean)))
}

// ---------------------------------------------------------------------------
// Best convex vector
// ---------------------------------------------------------------------------

/// Activity-weighted mean loss of a fixed vector: rounds weigh in with the
/// mass `q(E_t)` the vector puts on the active set, and rounds with zero
/// mass are skipped. `None` when every round has zero mass.
pub(crate) fn weighted_mean_loss(
    data: &Dataset,
    spec: LossSpec,
    q: &[f64],
) -> Result<Option<f64>> {
    let mut num = 0.0;
    let mut den = 0.0;
    for round in data.rounds() {
        let active = round.active();
        let mut mass = 0.0;
        let mut dot = 0.0;
        for &j in active.members() {
            mass += q[j];
            dot += q[j] * round.forecast(j).expect("active expert has a forecast");
        }
        if mass <= 0.0 {
            continue;
        }
        let pred = dot / mass;
        num += mass * spec.eval(pred, round.observation_or_err()?)?;
        den += mass;
    }
    if den <= 0.0 {
        return Ok(None);
    }
    Ok(Some(num / den))
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite values"));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        }
    }
    let mut out = Vec::with_capacity(n);
    for &u in v {
        out.push((u - tau).max(0.0));
    }
    // Guard against accumulated rounding: renormalize the positive part.
    let s: f64 = out.iter().sum();
    if s > 0.0 {
        for w in &mut out {
            *w /= s;
        }
    }
    out
}

/// Subgradient of the activity-weighted objective at `q`. Entries for
/// experts that never wake are zero.
fn weighted_subgradient(data: &Dataset, spec: LossSpec, q: &[f64], value: f64) -> Result<Vec<f64>> {
    let n = q.len();
    let mut grad = alloc::vec![0.0f64; n];
    let mut den = 0.0;
    for round in data.rounds() {
        let active = round.active();
        let mut mass = 0.0;
        let mut dot = 0.0;
        for &j in active.members() {
            mass += q[j];
            dot += q[j] * round.forecast(j).expect("active expert has a forecast");
        }
        if mass <= 0.0 {
            continue;
        }
        let pred = dot / mass;
        let y = round.observation_or_err()?;
        let loss = spec.eval(pred, y)?;
        let slope = spec.derivative(pred, y)?;
        for &j in active.members() {
            let f = round.forecast(j).expect("active expert has a forecast");
            grad[j] += loss + slope * (f - pred) - value;
        }
        den += mass;
    }
    for g in &mut grad {
        *g /= den;
    }
    Ok(grad)
}

/// Approximately minimizes the activity-weighted score over fixed convex
/// vectors: multi-start projected subgradient descent followed by seeded
/// Monte-Carlo perturbation. The uniform vector and every vertex are
/// evaluated exactly first, so the result never scores worse than any of
/// them. `budget` scales the total iteration count.
pub fn best_convex_vector(
    data: &Dataset,
    spec: LossSpec,
    budget: usize,
    seed: u64,
) -> Result<(WeightVector, f64)> {
    if budget == 0 {
        return Err(Error::InvalidParameter("optimization budget must be at least 1"));
    }
    let n = data.expert_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let uniform = alloc::vec![1.0 / n as f64; n];
    let mut incumbent = uniform.clone();
    let mut incumbent_value = weighted_mean_loss(data, spec, &uniform)?
        .ok_or(Error::UndefinedScore("no active mass on any round"))?;
    for j in 0..n {
        let mut vertex = alloc::vec![0.0; n];
        vertex[j] = 1.0;
        if let Some(value) = weighted_mean_loss(data, spec, &vertex)? {
            if value < incumbent_value {
                incumbent_value = value;
                incumbent = vertex;
            }
        }
    }

    let mut starts: Vec<Vec<f64>> = alloc::vec![uniform, incumbent.clone()];
    for _ in 0..4 {
        // Dirichlet(1) sample via normalized exponentials.
        let mut p: Vec<f64> = (0..n).map(|_| -numeric::ln(1.0 - rng.random::<f64>())).collect();
        let s: f64 = p.iter().sum();
        for w in &mut p {
            *w /= s;
        }
        starts.push(p);
    }

    let descent_iters = (2 * budget / 3 / starts.len()).max(1);
    for start in starts {
        let mut q = start;
        for k in 1..=descent_iters {
            let value = match weighted_mean_loss(data, spec, &q)? {
                Some(v) => v,
                None => break,
            };
            if value < incumbent_value {
                incumbent_value = value;
                incumbent = q.clone();
            }
            let grad = weighted_subgradient(data, spec, &q, value)?;
            let norm = numeric::sqrt(grad.iter().map(|g| g * g).sum::<f64>());
            let step = core::f64::consts::SQRT_2 / ((norm + 1e-12) * numeric::sqrt(k as f64));
            for j in 0..n {
                q[j] -= step * grad[j];
            }
            q = project_simplex(&q);
        }
    }

    let mc_iters = (budget / 3).max(1);
    for i in 0..mc_iters {
        // Radius shrinks geometrically from 0.5 toward ~2e-3.
        let stage = 1.0 + 8.0 * i as f64 / mc_iters as f64;
        let radius = numeric::exp(-core::f64::consts::LN_2 * stage);
        let mut q = incumbent.clone();
        for w in q.iter_mut() {
            *w += radius * (2.0 * rng.random::<f64>() - 1.0);
        }
        let q = project_simplex(&q);
        if let Some(value) = weighted_mean_loss(data, spec, &q)? {
            if value < incumbent_value {
                incumbent_value = value;
                incumbent = q;
            }
        }
    }

    Ok((WeightVector::new(incumbent)?, score_from_mean(spec, incumbent_value)))
}

// ---------------------------------------------------------------------------
// Compound experts
// ---------------------------------------------------------------------------

/// One expert per round, each active when assigned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompoundExpert {
    assignment: Vec<ExpertId>,
}

impl CompoundExpert {
    /// Validates the assignment against the data: one entry per round, each
    /// naming an active expert.
    pub fn from_assignment(assignment: Vec<ExpertId>, data: &Dataset) -> Result<Self> {
        if assignment.len() != data.len() {
            return Err(Error::LengthMismatch { expected: data.len(), got: assignment.len() });
        }
        for (round, id) in data.rounds().iter().zip(&assignment) {
            if id.0 >= data.expert_count() {
                return Err(Error::ExpertOutOfRange { expert: id.0, count: data.expert_count() });
            }
            if !round.active().contains(id.0) {
                return Err(Error::MassOffActiveSet);
            }
        }
        Ok(CompoundExpert { assignment })
    }

    pub fn assignment(&self) -> &[ExpertId] {
        &self.assignment
    }

    /// Number of shifts: rounds whose expert differs from the previous one.
    pub fn size(&self) -> usize {
        self.assignment.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

/// Cumulative loss of following a compound expert over the whole stream.
pub fn compound_loss(data: &Dataset, spec: LossSpec, compound: &CompoundExpert) -> Result<f64> {
    if compound.assignment.len() != data.len() {
        return Err(Error::LengthMismatch { expected: data.len(), got: compound.assignment.len() });
    }
    let mut sum = 0.0;
    for (round, id) in data.rounds().iter().zip(&compound.assignment) {
        let f = round.forecast(id.0).ok_or(Error::MassOffActiveSet)?;
        sum += spec.eval(f, round.observation_or_err()?)?;
    }
    Ok(sum)
}

/// Exact minimizer of cumulative loss over legal compound experts with at
/// most `m` shifts, by dynamic programming over (round, expert, shifts
/// left). With `m = T - 1` this is the prescient strategy. Ties resolve to
/// the lexicographically smallest assignment. Returns the assignment and
/// its cumulative loss. Memory is O(T * N * m).
pub fn best_compound_expert(
    data: &Dataset,
    spec: LossSpec,
    m: usize,
) -> Result<(CompoundExpert, f64)> {
    let t_len = data.len();
    if m > t_len - 1 {
        return Err(Error::InvalidParameter("shift budget exceeds horizon minus one"));
    }
    let n = data.expert_count();

    let mut cost = alloc::vec![f64::INFINITY; t_len * n];
    for (t, round) in data.rounds().iter().enumerate() {
        let y = round.observation_or_err()?;
        for &j in round.active().members() {
            let f = round.forecast(j).expect("active expert has a forecast");
            cost[t * n + j] = spec.eval(f, y)?;
        }
    }

    if m == t_len - 1 {
        // Prescient fast path: the per-round best active expert.
        let mut assignment = Vec::with_capacity(t_len);
        let mut total = 0.0;
        for (t, round) in data.rounds().iter().enumerate() {
            let mut best = usize::MAX;
            for &j in round.active().members() {
                if best == usize::MAX || cost[t * n + j] < cost[t * n + best] {
                    best = j;
                }
            }
            total += cost[t * n + best];
            assignment.push(ExpertId(best));
        }
        return Ok((CompoundExpert { assignment }, total));
    }

    // suffix[(t, j, s)]: minimal loss of rounds t.. starting at expert j
    // (must be active at t) with s shifts still allowed.
    let width = m + 1;
    let idx = |t: usize, j: usize, s: usize| (t * n + j) * width + s;
    let mut suffix = alloc::vec![f64::INFINITY; t_len * n * width];
    for &j in data.rounds()[t_len - 1].active().members() {
        for s in 0..width {
            suffix[idx(t_len - 1, j, s)] = cost[(t_len - 1) * n + j];
        }
    }
    for t in (0..t_len - 1).rev() {
        let next = data.rounds()[t + 1].active();
        // Best and second-best continuation per shift count, for switching.
        let mut best_two = alloc::vec![(f64::INFINITY, usize::MAX, f64::INFINITY); width];
        for s in 0..width {
            for &k in next.members() {
                let v = suffix[idx(t + 1, k, s)];
                let (b1, a1, b2) = best_two[s];
                if v < b1 {
                    best_two[s] = (v, k, b1);
                } else if v < b2 {
                    best_two[s] = (b1, a1, v);
                }
            }
        }
        for &j in data.rounds()[t].active().members() {
            for s in 0..width {
                let stay =
                    if next.contains(j) { suffix[idx(t + 1, j, s)] } else { f64::INFINITY };
                let switch = if s > 0 {
                    let (b1, a1, b2) = best_two[s - 1];
                    if a1 == j {
                        b2
                    } else {
                        b1
                    }
                } else {
                    f64::INFINITY
                };
                let cont = stay.min(switch);
                if cont.is_finite() {
                    suffix[idx(t, j, s)] = cost[t * n + j] + cont;
                }
            }
        }
    }

    let first = data.rounds()[0].active();
    let mut start = usize::MAX;
    for &j in first.members() {
        if start == usize::MAX || suffix[idx(0, j, m)] < suffix[idx(0, start, m)] {
            start = j;
        }
    }
    if start == usize::MAX || !suffix[idx(0, start, m)].is_finite() {
        return Err(Error::InfeasibleCompound { switches: m });
    }
    let total = suffix[idx(0, start, m)];

    // Forward reconstruction; at each step the candidate values are the
    // exact floats the minimum above was taken over, so picking the
    // smallest index attaining the minimum is safe and yields the
    // lexicographically smallest optimal assignment.
    let mut assignment = Vec::with_capacity(t_len);
    assignment.push(ExpertId(start));
    let mut j = start;
    let mut s = m;
    for t in 0..t_len - 1 {
        let next = data.rounds()[t + 1].active();
        let value_of = |k: usize, s_now: usize| -> f64 {
            if k == j {
                suffix[idx(t + 1, k, s_now)]
            } else if s_now > 0 {
                suffix[idx(t + 1, k, s_now - 1)]
            } else {
                f64::INFINITY
            }
        };
        let mut target = f64::INFINITY;
        for &k in next.members() {
            target = target.min(value_of(k, s));
        }
        let mut chosen = usize::MAX;
        for &k in next.members() {
            if value_of(k, s) == target {
                chosen = k;
                break;
            }
        }
        debug_assert_ne!(chosen, usize::MAX);
        if chosen != j {
            s -= 1;
        }
        j = chosen;
        assignment.push(ExpertId(j));
    }

    Ok((CompoundExpert { assignment }, total))
}

// ---------------------------------------------------------------------------
// Partition benchmarks
// ---------------------------------------------------------------------------

/// Benchmarks over the partition of rounds by activity pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionBenchmarks {
    /// Number of distinct active sets.
    pub elements: usize,
    /// Combined score of the per-element best single expert.
    pub best_expert: f64,
    /// Combined score of the per-element best convex vector.
    pub best_convex: f64,
}

/// Partitions rounds by their active set, picks the best expert and the
/// best convex vector separately on each element, and combines per-element
/// loss sums with weight `1/T` (the full horizon, regardless of element
/// sizes). The convex search gets `budget` iterations per element and a
/// per-element seed derived from `seed`.
pub fn partition_oracles(
    data: &Dataset,
    spec: LossSpec,
    budget: usize,
    seed: u64,
) -> Result<PartitionBenchmarks> {
    let mut elements: BTreeMap<Vec<usize>, Vec<ForecastRound>> = BTreeMap::new();
    for round in data.rounds() {
        elements
            .entry(round.active().members().to_vec())
            .or_default()
            .push(round.clone());
    }
    let t_total = data.len() as f64;
    let mut expert_sum = 0.0;
    let mut convex_sum = 0.0;
    for (k, (_, rounds)) in elements.iter().enumerate() {
        let t_k = rounds.len() as f64;
        let sub = Dataset::new(rounds.clone(), data.bound())?;
        let (_, expert_score) = best_single_expert(&sub, spec)?;
        let (_, convex_score) = best_convex_vector(&sub, spec, budget, seed.wrapping_add(k as u64))?;
        // Scores are (root) means over the element; recover loss sums.
        let expert_mean = match spec {
            LossSpec::Square => expert_score * expert_score,
            _ => expert_score,
        };
        let convex_mean = match spec {
            LossSpec::Square => convex_score * convex_score,
            _ => convex_score,
        };
        expert_sum += expert_mean * t_k;
        convex_sum += convex_mean * t_k;
    }
    Ok(PartitionBenchmarks {
        elements: elements.len(),
        best_expert: score_from_mean(spec, expert_sum / t_total),
        best_convex: score_from_mean(spec, convex_sum / t_total),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ActiveSet;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn full(n: usize) -> ActiveSet {
        ActiveSet::full(n).unwrap()
    }

    fn round(t: usize, active: ActiveSet, forecasts: Vec<f64>, y: f64) -> ForecastRound {
        ForecastRound::new(t, active, forecasts).unwrap().with_observation(y).unwrap()
    }

    fn random_dataset(t_len: usize, n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rounds: Vec<ForecastRound> = (1..=t_len)
            .map(|t| {
                let members: Vec<usize> =
                    (0..n).filter(|_| rng.random::<f64>() < 0.7).collect();
                let active = if members.is_empty() {
                    full(n)
                } else {
                    ActiveSet::new(n, members).unwrap()
                };
                let forecasts: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                round(t, active, forecasts, rng.random::<f64>())
            })
            .collect();
        Dataset::new(rounds, 1.0).unwrap()
    }

    /// Minimal loss over every legal assignment with at most `m` shifts,
    /// enumerated depth-first in lexicographic order (so the first optimum
    /// found is the lexicographically smallest).
    fn brute_force_compound(
        data: &Dataset,
        spec: LossSpec,
        m: usize,
    ) -> Option<(Vec<usize>, f64)> {
        #[allow(clippy::too_many_arguments)]
        fn recurse(
            data: &Dataset,
            spec: LossSpec,
            t: usize,
            prev: usize,
            shifts: usize,
            m: usize,
            loss: f64,
            path: &mut Vec<usize>,
            best: &mut Option<(Vec<usize>, f64)>,
        ) {
            if t == data.len() {
                if best.as_ref().is_none_or(|(_, b)| loss < *b) {
                    *best = Some((path.clone(), loss));
                }
                return;
            }
            let round = &data.rounds()[t];
            let y = round.observation().unwrap();
            for &j in round.active().members() {
                let shifts = shifts + usize::from(t > 0 && j != prev);
                if shifts > m {
                    continue;
                }
                let step = spec.eval(round.forecast(j).unwrap(), y).unwrap();
                path.push(j);
                recurse(data, spec, t + 1, j, shifts, m, loss + step, path, best);
                path.pop();
            }
        }
        let mut best = None;
        recurse(data, spec, 0, usize::MAX, 0, m, 0.0, &mut Vec::new(), &mut best);
        best
    }

    #[test]
    fn dataset_validation_catches_range_and_order() {
        let r1 = round(1, full(2), vec![0.5, 0.5], 0.5);
        let r2 = round(2, full(2), vec![0.5, 0.5], 0.5);
        assert!(Dataset::new(vec![r1.clone(), r2.clone()], 1.0).is_ok());
        assert!(Dataset::new(vec![], 1.0).is_err());
        assert!(Dataset::new(vec![r2.clone(), r1.clone()], 1.0).is_err());
        assert!(Dataset::new(vec![r1.clone()], 0.4).is_err());
        let no_obs = ForecastRound::new(1, full(2), vec![0.5, 0.5]).unwrap();
        assert!(Dataset::new(vec![no_obs], 1.0).is_err());

        let inferred =
            Dataset::with_inferred_bound(vec![round(1, full(2), vec![0.2, 0.9], 0.5)]).unwrap();
        assert_eq!(inferred.bound(), 0.9);
    }

    #[test]
    fn uniform_rule_matches_hand_values() {
        // Exact experts.
        let data = Dataset::new(vec![round(1, full(2), vec![0.3, 0.3], 0.3)], 1.0).unwrap();
        assert_eq!(uniform_rule(&data, LossSpec::Square).unwrap(), 0.0);

        // Symmetric cancellation around y.
        let data = Dataset::new(
            vec![round(1, full(2), vec![0.2, 0.4], 0.3), round(2, full(2), vec![0.5, 0.7], 0.6)],
            1.0,
        )
        .unwrap();
        assert!(uniform_rule(&data, LossSpec::Square).unwrap() < 1e-12);

        // Single round, average 0.5 against 0.
        let data = Dataset::new(vec![round(1, full(2), vec![0.0, 1.0], 0.0)], 1.0).unwrap();
        assert!((uniform_rule(&data, LossSpec::Square).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn best_single_expert_scores_per_active_round() {
        // Expert 0 errs by 2 every round; expert 1 errs by 1 but only when
        // awake. Means: 4 vs 1.
        let rounds = vec![
            round(1, full(2), vec![2.0, 1.0], 0.0),
            round(2, ActiveSet::new(2, vec![0]).unwrap(), vec![2.0, 0.0], 0.0),
            round(3, full(2), vec![2.0, 1.0], 0.0),
        ];
        let data = Dataset::new(rounds, 2.0).unwrap();
        let (id, score) = best_single_expert(&data, LossSpec::Square).unwrap();
        assert_eq!(id, ExpertId(1));
        assert!((score - 1.0).abs() < 1e-15);

        // Tie goes to the lower index (0.25 off on each side, exactly).
        let data = Dataset::new(vec![round(1, full(2), vec![0.5, 0.0], 0.25)], 1.0).unwrap();
        let (id, _) = best_single_expert(&data, LossSpec::Square).unwrap();
        assert_eq!(id, ExpertId(0));
    }

    #[test]
    fn best_convex_recovers_exact_mixtures() {
        // Expert 1 is exact: a vertex start nails it.
        let rounds: Vec<ForecastRound> = (1..=5)
            .map(|t| {
                let y = 0.1 * t as f64;
                round(t, full(2), vec![(y + 0.2).min(1.0), y], y)
            })
            .collect();
        let data = Dataset::new(rounds, 1.0).unwrap();
        let (q, score) = best_convex_vector(&data, LossSpec::Square, 500, 7).unwrap();
        assert!(score <= 1e-6);
        assert!(q.get(1) > 0.99);

        // Constant forecasts (0, 1) and y = 0.3: minimizer is (0.7, 0.3).
        let rounds: Vec<ForecastRound> =
            (1..=4).map(|t| round(t, full(2), vec![0.0, 1.0], 0.3)).collect();
        let data = Dataset::new(rounds, 1.0).unwrap();
        let (q, score) = best_convex_vector(&data, LossSpec::Square, 3000, 11).unwrap();
        assert!(score <= 5e-3, "score {score}");
        assert!((q.get(0) - 0.7).abs() < 0.02, "q {:?}", q.as_slice());
    }

    #[test]
    fn best_convex_never_loses_to_vertices_or_uniform() {
        for seed in 0..5u64 {
            let data = random_dataset(12, 3, 100 + seed);
            let (_, convex) = best_convex_vector(&data, LossSpec::Square, 300, seed).unwrap();
            let (_, vertex) = best_single_expert(&data, LossSpec::Square).unwrap();
            // Compare on the same weighted footing: the vertex score is the
            // weighted objective of that vertex.
            assert!(convex <= vertex + 1e-12);
        }
        // With everyone always active the uniform rule is also dominated.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rounds: Vec<ForecastRound> = (1..=10)
            .map(|t| {
                let forecasts: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
                round(t, full(3), forecasts, rng.random::<f64>())
            })
            .collect();
        let data = Dataset::new(rounds, 1.0).unwrap();
        let (_, convex) = best_convex_vector(&data, LossSpec::Square, 300, 0).unwrap();
        assert!(convex <= uniform_rule(&data, LossSpec::Square).unwrap() + 1e-12);
        assert!(convex <= best_single_expert(&data, LossSpec::Square).unwrap().1 + 1e-12);
    }

    #[test]
    fn project_simplex_matches_hand_cases() {
        let p = project_simplex(&[1.2, -0.2]);
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1] == 0.0);
        let p = project_simplex(&[0.25, 0.25, 0.5]);
        assert!((p[0] - 0.25).abs() < 1e-12 && (p[2] - 0.5).abs() < 1e-12);
        let p = project_simplex(&[5.0, 5.0, 5.0]);
        for w in &p {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn compound_prescient_and_constant_paths() {
        // m = T-1: per-round best active expert.
        let rounds = vec![
            round(1, full(2), vec![0.1, 0.9], 0.0),
            round(2, full(2), vec![0.9, 0.1], 0.0),
            round(3, full(2), vec![0.1, 0.9], 0.0),
        ];
        let data = Dataset::new(rounds, 1.0).unwrap();
        let (c, loss) = best_compound_expert(&data, LossSpec::Square, 2).unwrap();
        assert_eq!(c.assignment(), &[ExpertId(0), ExpertId(1), ExpertId(0)]);
        assert_eq!(c.size(), 2);
        assert!((loss - 0.03).abs() < 1e-12);

        // m = 0 with a dominant always-active expert.
        let (c, loss) = best_compound_expert(&data, LossSpec::Square, 0).unwrap();
        assert!(c.size() == 0);
        // Both constants cost 0.01 + 0.81 + ...; expert 0: 0.01+0.81+0.01,
        // expert 1: 0.81+0.01+0.81. Expert 0 wins.
        assert_eq!(c.assignment()[0], ExpertId(0));
        assert!((loss - 0.83).abs() < 1e-12);
        assert!((compound_loss(&data, LossSpec::Square, &c).unwrap() - loss).abs() < 1e-15);
    }

    #[test]
    fn compound_dp_matches_brute_force_and_is_monotone() {
        for seed in 0..8u64 {
            let data = random_dataset(6, 3, 200 + seed);
            let mut previous = f64::INFINITY;
            for m in 0..=3usize {
                let dp = best_compound_expert(&data, LossSpec::Square, m);
                let brute = brute_force_compound(&data, LossSpec::Square, m);
                match (dp, brute) {
                    (Ok((c, loss)), Some((assignment, expected))) => {
                        assert!((loss - expected).abs() < 1e-12);
                        let ids: Vec<usize> = c.assignment().iter().map(|e| e.0).collect();
                        assert_eq!(ids, assignment, "seed {seed} m {m}");
                        assert!(c.size() <= m);
                        assert!(loss <= previous + 1e-12);
                        previous = loss;
                    }
                    (Err(Error::InfeasibleCompound { .. }), None) => {}
                    (dp, brute) => {
                        panic!("divergence at seed {seed} m {m}: {dp:?} vs {brute:?}")
                    }
                }
            }
        }
    }

    #[test]
    fn compound_infeasibility_is_reported() {
        // Activity forces a switch every round; m = 0 cannot cover it.
        let rounds = vec![
            round(1, ActiveSet::new(2, vec![0]).unwrap(), vec![0.1, 0.0], 0.0),
            round(2, ActiveSet::new(2, vec![1]).unwrap(), vec![0.0, 0.1], 0.0),
        ];
        let data = Dataset::new(rounds, 1.0).unwrap();
        match best_compound_expert(&data, LossSpec::Square, 0) {
            Err(Error::InfeasibleCompound { switches: 0 }) => {}
            other => panic!("expected infeasibility, got {other:?}"),
        }
        assert!(best_compound_expert(&data, LossSpec::Square, 1).is_ok());
        assert!(best_compound_expert(&data, LossSpec::Square, 5).is_err());
    }

    #[test]
    fn partition_degenerates_to_full_data_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rounds: Vec<ForecastRound> = (1..=10)
            .map(|t| {
                let forecasts: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
                round(t, full(3), forecasts, rng.random::<f64>())
            })
            .collect();
        let data = Dataset::new(rounds, 1.0).unwrap();
        let p = partition_oracles(&data, LossSpec::Square, 300, 5).unwrap();
        assert_eq!(p.elements, 1);
        let (_, expert) = best_single_expert(&data, LossSpec::Square).unwrap();
        assert!((p.best_expert - expert).abs() < 1e-12);
        let (_, convex) = best_convex_vector(&data, LossSpec::Square, 300, 5).unwrap();
        assert!((p.best_convex - convex).abs() < 1e-12);
        assert!(p.best_convex <= p.best_expert + 1e-12);
    }

    #[test]
    fn partition_finds_per_element_exact_experts() {
        // Alternating active sets; in each element one expert is exact.
        let a = ActiveSet::new(3, vec![0, 1]).unwrap();
        let b = ActiveSet::new(3, vec![1, 2]).unwrap();
        let rounds = vec![
            round(1, a.clone(), vec![0.3, 0.9, 0.0], 0.3),
            round(2, b.clone(), vec![0.0, 0.9, 0.5], 0.5),
            round(3, a, vec![0.4, 0.9, 0.0], 0.4),
            round(4, b, vec![0.0, 0.9, 0.6], 0.6),
        ];
        let data = Dataset::new(rounds, 1.0).unwrap();
        let p = partition_oracles(&data, LossSpec::Square, 200, 1).unwrap();
        assert_eq!(p.elements, 2);
        assert!(p.best_expert < 1e-9);
        assert!(p.best_convex < 1e-6);
    }

    #[test]
    fn partition_best_expert_matches_per_element_brute_force() {
        for seed in 0..4u64 {
            let data = random_dataset(8, 3, 300 + seed);
            let p = partition_oracles(&data, LossSpec::Square, 200, seed).unwrap();
            // Recompute by hand: group rounds, take each group's best
            // per-expert loss sum, combine with 1/T.
            let mut groups: BTreeMap<Vec<usize>, Vec<&ForecastRound>> = BTreeMap::new();
            for r in data.rounds() {
                groups.entry(r.active().members().to_vec()).or_default().push(r);
            }
            let mut total = 0.0;
            for (members, rounds) in &groups {
                let mut best = f64::INFINITY;
                for &j in members {
                    let sum: f64 = rounds
                        .iter()
                        .map(|r| {
                            let d = r.forecast(j).unwrap() - r.observation().unwrap();
                            d * d
                        })
                        .sum();
                    best = best.min(sum);
                }
                total += best;
            }
            let expected = numeric::sqrt(total / data.len() as f64);
            assert!((p.best_expert - expected).abs() < 1e-12, "seed {seed}");
            assert_eq!(p.elements, groups.len());
        }
    }
}
