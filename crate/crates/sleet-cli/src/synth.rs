//! Synthetic streams for tests and demos: a smooth seasonal signal, experts
//! with per-regime bias/noise skills, configurable activity patterns, and
//! optional regime shifts that rotate which expert is the good one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sleet_core::oracles::Dataset;
use sleet_core::types::{ActiveSet, ForecastRound};

use crate::error::{CliError, Result};

/// Who is awake when.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivityModel {
    /// Every expert active every round.
    AlwaysOn,
    /// Expert `j` sleeps whenever `(t - 1 + j) % period == 0`, staggering
    /// naps so the active set is never empty (needs at least two experts).
    PeriodicSleep { period: usize },
    /// Each expert sleeps independently with this probability; rounds where
    /// everyone dozed off are redrawn, so `rate` must stay below one.
    RandomSleep { rate: f64 },
}

/// Forecast quality of one expert within a regime: a systematic offset and
/// a noise amplitude, both as fractions of the bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Skill {
    pub bias: f64,
    pub noise: f64,
}

/// Everything that determines a generated stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub experts: usize,
    pub rounds: usize,
    pub bound: f64,
    pub activity: ActivityModel,
    /// One skill per expert. After each regime shift the table rotates:
    /// expert `j` plays `skills[(j + shifts_so_far) % experts]`, so the
    /// best slot moves to a different expert.
    pub skills: Vec<Skill>,
    /// Rounds at which a new regime starts (strictly increasing, each in
    /// `2..=rounds`).
    pub shifts: Vec<usize>,
    /// When set, rounds are labeled `g0..g{k-1}` cyclically for grouped
    /// residual summaries.
    pub group_cycle: Option<usize>,
    pub seed: u64,
}

/// A generated stream plus its optional group labels.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub data: Dataset,
    pub groups: Option<Vec<String>>,
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.experts == 0 {
            return Err(CliError::Config("synthetic stream needs at least one expert".into()));
        }
        if self.rounds == 0 {
            return Err(CliError::Config("synthetic stream needs at least one round".into()));
        }
        if !(self.bound.is_finite() && self.bound > 0.0) {
            return Err(CliError::Config("bound must be positive and finite".into()));
        }
        if self.skills.len() != self.experts {
            return Err(CliError::Config(format!(
                "need one skill per expert: {} skills for {} experts",
                self.skills.len(),
                self.experts
            )));
        }
        for skill in &self.skills {
            if !skill.bias.is_finite() || !(skill.noise.is_finite() && skill.noise >= 0.0) {
                return Err(CliError::Config("skill bias/noise out of range".into()));
            }
        }
        match self.activity {
            ActivityModel::AlwaysOn => {}
            ActivityModel::PeriodicSleep { period } => {
                if period < 2 {
                    return Err(CliError::Config(
                        "periodic sleep with period < 2 empties the active set".into(),
                    ));
                }
                if self.experts < 2 {
                    return Err(CliError::Config(
                        "periodic sleep with a single expert empties the active set".into(),
                    ));
                }
            }
            ActivityModel::RandomSleep { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return Err(CliError::Config(
                        "random sleep rate must lie in [0, 1)".into(),
                    ));
                }
            }
        }
        let mut previous = 1usize;
        for &shift in &self.shifts {
            if shift <= previous || shift > self.rounds {
                return Err(CliError::Config(
                    "shift rounds must be strictly increasing within 2..=rounds".into(),
                ));
            }
            previous = shift;
        }
        if self.group_cycle == Some(0) {
            return Err(CliError::Config("group cycle must be at least 1".into()));
        }
        Ok(())
    }
}

/// Generates a stream, deterministically in the seed. Per round the draws
/// happen in a fixed order: activity, observation noise, then one noise
/// term per expert (active or not), so activity models stay comparable
/// under a shared seed.
pub fn generate(spec: &SynthSpec) -> Result<Synthetic> {
    spec.validate()?;
    let n = spec.experts;
    let b = spec.bound;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rounds = Vec::with_capacity(spec.rounds);
    let mut groups = Vec::new();
    let mut shifts_passed = 0usize;
    for t in 1..=spec.rounds {
        if shifts_passed < spec.shifts.len() && spec.shifts[shifts_passed] == t {
            shifts_passed += 1;
        }
        let members: Vec<usize> = match spec.activity {
            ActivityModel::AlwaysOn => (0..n).collect(),
            ActivityModel::PeriodicSleep { period } => {
                (0..n).filter(|j| (t - 1 + j) % period != 0).collect()
            }
            ActivityModel::RandomSleep { rate } => loop {
                let members: Vec<usize> =
                    (0..n).filter(|_| rng.random::<f64>() >= rate).collect();
                if !members.is_empty() {
                    break members;
                }
            },
        };
        let u = 2.0 * rng.random::<f64>() - 1.0;
        let season = 0.5 + 0.35 * (core::f64::consts::TAU * (t as f64 - 1.0) / 200.0).sin();
        let y = b * (season + 0.05 * u).clamp(0.0, 1.0);
        let forecasts: Vec<f64> = (0..n)
            .map(|j| {
                let skill = spec.skills[(j + shifts_passed) % n];
                let noise = 2.0 * rng.random::<f64>() - 1.0;
                (y + skill.bias * b + skill.noise * b * noise).clamp(0.0, b)
            })
            .collect();
        let active = ActiveSet::new(n, members).map_err(CliError::Core)?;
        let round = ForecastRound::new(t, active, forecasts)
            .and_then(|r| r.with_observation(y))
            .map_err(|e| CliError::Round { t, source: e })?;
        rounds.push(round);
        if let Some(cycle) = spec.group_cycle {
            groups.push(format!("g{}", (t - 1) % cycle));
        }
    }
    let data = Dataset::new(rounds, b).map_err(CliError::Core)?;
    Ok(Synthetic { data, groups: spec.group_cycle.map(|_| groups) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use sleet_core::loss::LossSpec;
    use sleet_core::oracles::{best_compound_expert, best_single_expert};

    fn base_spec() -> SynthSpec {
        SynthSpec {
            experts: 3,
            rounds: 40,
            bound: 1.0,
            activity: ActivityModel::AlwaysOn,
            skills: vec![
                Skill { bias: 0.0, noise: 0.02 },
                Skill { bias: 0.2, noise: 0.05 },
                Skill { bias: -0.2, noise: 0.05 },
            ],
            shifts: vec![],
            group_cycle: None,
            seed: 11,
        }
    }

    #[test]
    fn always_on_fills_every_active_set() {
        let synthetic = generate(&base_spec()).unwrap();
        for round in synthetic.data.rounds() {
            assert_eq!(round.active().len(), 3);
        }
    }

    #[test]
    fn periodic_sleep_alternates_set_sizes() {
        let mut spec = base_spec();
        spec.activity = ActivityModel::PeriodicSleep { period: 2 };
        let synthetic = generate(&spec).unwrap();
        let sizes: Vec<usize> =
            synthetic.data.rounds().iter().map(|r| r.active().len()).collect();
        assert_eq!(&sizes[..4], &[1, 2, 1, 2]);
        // Expert 0 sleeps exactly on odd rounds.
        for round in synthetic.data.rounds() {
            assert_eq!(round.active().contains(0), round.t() % 2 == 0);
        }
    }

    #[test]
    fn random_sleep_never_empties_a_round() {
        let mut spec = base_spec();
        spec.activity = ActivityModel::RandomSleep { rate: 0.8 };
        spec.rounds = 200;
        let synthetic = generate(&spec).unwrap();
        for round in synthetic.data.rounds() {
            assert!(!round.active().members().is_empty());
        }
    }

    #[test]
    fn generation_is_deterministic_in_the_seed() {
        let a = generate(&base_spec()).unwrap();
        let b = generate(&base_spec()).unwrap();
        for (ra, rb) in a.data.rounds().iter().zip(b.data.rounds()) {
            assert_eq!(ra.observation().unwrap().to_bits(), rb.observation().unwrap().to_bits());
            for j in 0..3 {
                assert_eq!(
                    ra.forecast(j).map(f64::to_bits),
                    rb.forecast(j).map(f64::to_bits)
                );
            }
        }
        let mut other = base_spec();
        other.seed = 12;
        let c = generate(&other).unwrap();
        assert_ne!(
            a.data.rounds()[0].observation().unwrap().to_bits(),
            c.data.rounds()[0].observation().unwrap().to_bits()
        );
    }

    #[test]
    fn a_regime_shift_makes_tracking_beat_any_single_expert() {
        let mut spec = base_spec();
        spec.experts = 2;
        spec.skills = vec![Skill { bias: 0.0, noise: 0.02 }, Skill { bias: 0.4, noise: 0.05 }];
        spec.rounds = 50;
        spec.shifts = vec![26];
        let synthetic = generate(&spec).unwrap();
        let (_, single) = best_single_expert(&synthetic.data, LossSpec::Square).unwrap();
        let (compound, tracked) =
            best_compound_expert(&synthetic.data, LossSpec::Square, 1).unwrap();
        assert_eq!(compound.size(), 1);
        // Cumulative tracked loss, averaged, strictly beats the best
        // constant expert.
        let tracked_rmse = (tracked / 50.0).sqrt();
        assert!(tracked_rmse < single, "tracked {tracked_rmse} vs single {single}");
    }

    #[test]
    fn group_labels_cycle() {
        let mut spec = base_spec();
        spec.group_cycle = Some(3);
        let synthetic = generate(&spec).unwrap();
        let groups = synthetic.groups.unwrap();
        assert_eq!(&groups[..4], &["g0", "g1", "g2", "g0"]);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = base_spec();
        spec.activity = ActivityModel::PeriodicSleep { period: 1 };
        assert!(generate(&spec).is_err());

        let mut spec = base_spec();
        spec.experts = 1;
        spec.skills.truncate(1);
        spec.activity = ActivityModel::PeriodicSleep { period: 2 };
        assert!(generate(&spec).is_err());

        let mut spec = base_spec();
        spec.activity = ActivityModel::RandomSleep { rate: 1.0 };
        assert!(generate(&spec).is_err());

        let mut spec = base_spec();
        spec.skills.pop();
        assert!(generate(&spec).is_err());

        let mut spec = base_spec();
        spec.shifts = vec![10, 10];
        assert!(generate(&spec).is_err());
    }
}
