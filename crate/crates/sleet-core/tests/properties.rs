//! Property tests for the structural invariants: convexity and support of
//! played weights, mass conservation of the share update, argmin selection,
//! quantile ordering, and the self-consistency of the compound-expert
//! minimizer.

use proptest::prelude::*;

use sleet_core::eval::{abs_quantiles, rmse_rule};
use sleet_core::loss::LossSpec;
use sleet_core::operational::OperationalState;
use sleet_core::oracles::{best_compound_expert, compound_loss, project_simplex, Dataset};
use sleet_core::rules::RuleState;
use sleet_core::tuning::Grid;
use sleet_core::types::{ActiveSet, ForecastRound, WeightVector};

fn stream_strategy(max_rounds: usize) -> impl Strategy<Value = Vec<ForecastRound>> {
    (1..5usize).prop_flat_map(move |n| {
        prop::collection::vec(
            (
                prop::collection::vec(any::<bool>(), n),
                prop::collection::vec(0.0..1.0f64, n),
                0.0..1.0f64,
            ),
            1..max_rounds,
        )
        .prop_map(move |rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (mask, forecasts, y))| {
                    let mut members: Vec<usize> = mask
                        .iter()
                        .enumerate()
                        .filter_map(|(j, &m)| m.then_some(j))
                        .collect();
                    if members.is_empty() {
                        members.push(i % n);
                    }
                    ForecastRound::new(i + 1, ActiveSet::new(n, members).unwrap(), forecasts)
                        .unwrap()
                        .with_observation(y)
                        .unwrap()
                })
                .collect()
        })
    })
}

fn build_rule(kind: u8, eta: f64, alpha: f64, gradient: bool, n: usize) -> RuleState {
    let prior = WeightVector::uniform(n).unwrap();
    let base = match kind % 3 {
        0 => RuleState::ewa(LossSpec::Square, eta, prior).unwrap(),
        1 => RuleState::specialist(LossSpec::Square, eta, prior).unwrap(),
        _ => RuleState::fixed_share(LossSpec::Square, eta, alpha, prior).unwrap(),
    };
    if gradient {
        base.gradientize()
    } else {
        base
    }
}

proptest! {
    /// Weights played by any rule are convex vectors supported on the
    /// round's active set, for the base rules and the block-frozen wrapper.
    #[test]
    fn played_weights_are_convex_and_supported(
        stream in stream_strategy(30),
        kind in 0u8..3,
        eta in 0.01..5.0f64,
        alpha in 0.0..1.0f64,
        gradient in any::<bool>(),
        block in 1usize..4,
    ) {
        let n = stream[0].expert_count();
        let mut base = build_rule(kind, eta, alpha, gradient, n);
        let mut wrapped =
            OperationalState::new(block, build_rule(kind, eta, alpha, gradient, n)).unwrap();
        for (i, round) in stream.iter().enumerate() {
            let next = if i + 1 < stream.len() { stream[i + 1].active() } else { round.active() };
            for weights in [
                base.step(round, Some(next)).unwrap(),
                wrapped.step(round, Some(next)).unwrap(),
            ] {
                let mut sum = 0.0;
                for j in 0..n {
                    let w = weights.get(j);
                    prop_assert!(w >= 0.0 && w.is_finite());
                    if !round.active().contains(j) {
                        prop_assert_eq!(w, 0.0);
                    }
                    sum += w;
                }
                prop_assert!((sum - 1.0).abs() <= 1e-9);
            }
        }
    }

    /// With zero losses every round, the share update only moves mass
    /// around: the total unnormalized weight stays exactly one.
    #[test]
    fn share_update_conserves_mass_without_losses(
        stream in stream_strategy(40),
        eta in 0.01..5.0f64,
        alpha in 0.0..1.0f64,
    ) {
        let n = stream[0].expert_count();
        let prior = WeightVector::uniform(n).unwrap();
        let mut rule = RuleState::fixed_share(LossSpec::Square, eta, alpha, prior).unwrap();
        let zeros = vec![0.0; n];
        for (i, round) in stream.iter().enumerate() {
            let next = if i + 1 < stream.len() { stream[i + 1].active() } else { round.active() };
            rule.update_with_losses(round.active(), &zeros, 0.0, Some(next)).unwrap();
            let mass: f64 = rule
                .unnormalized_log_weights()
                .unwrap()
                .iter()
                .map(|lw| lw.exp())
                .sum();
            prop_assert!((mass - 1.0).abs() <= 1e-9, "mass {}", mass);
        }
    }

    /// Grid selection is the first-index argmin of cumulative losses.
    #[test]
    fn selection_is_the_first_index_argmin(
        losses in prop::collection::vec(0.0..100.0f64, 1..20),
    ) {
        let etas: Vec<f64> = (0..losses.len()).map(|i| (i + 1) as f64).collect();
        let mut grid = Grid::from_etas(&etas).unwrap();
        for (i, &loss) in losses.iter().enumerate() {
            grid.record_loss(i, loss).unwrap();
        }
        let mut expected = 0;
        for (i, &loss) in losses.iter().enumerate() {
            if loss < losses[expected] {
                expected = i;
            }
        }
        prop_assert_eq!(grid.select().unwrap(), expected);
    }

    /// Nearest-rank quantiles are ordered.
    #[test]
    fn quantiles_are_monotone(values in prop::collection::vec(-100.0..100.0f64, 1..50)) {
        let (q50, q75, q90) = abs_quantiles(&values).unwrap();
        prop_assert!(q50 <= q75 && q75 <= q90);
    }

    /// RMSE scales with the residuals, and its square is the mean squared
    /// loss.
    #[test]
    fn rmse_is_scale_equivariant(
        residuals in prop::collection::vec(-10.0..10.0f64, 1..40),
        scale in 0.1..10.0f64,
    ) {
        let base = rmse_rule(&residuals).unwrap();
        let scaled: Vec<f64> = residuals.iter().map(|r| r * scale).collect();
        prop_assert!((rmse_rule(&scaled).unwrap() - scale * base).abs() <= 1e-9);
        let mean_sq: f64 =
            residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64;
        prop_assert!((base * base - mean_sq).abs() <= 1e-12);
    }

    /// Simplex projection lands on the simplex and is idempotent.
    #[test]
    fn simplex_projection_is_sound(point in prop::collection::vec(-5.0..5.0f64, 1..8)) {
        let p = project_simplex(&point);
        let sum: f64 = p.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9);
        prop_assert!(p.iter().all(|&w| w >= 0.0));
        let again = project_simplex(&p);
        for (a, b) in p.iter().zip(&again) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    /// The compound minimizer reports a loss consistent with its own
    /// assignment, respects the shift budget, and improves weakly with m.
    #[test]
    fn compound_minimizer_is_self_consistent(
        stream in stream_strategy(12),
        m in 0usize..4,
    ) {
        let data = Dataset::new(stream, 1.0).unwrap();
        let m = m.min(data.len() - 1);
        if let Ok((compound, loss)) = best_compound_expert(&data, LossSpec::Square, m) {
            prop_assert!(compound.size() <= m);
            let replay = compound_loss(&data, LossSpec::Square, &compound).unwrap();
            prop_assert!((replay - loss).abs() <= 1e-12);
            if m < data.len() - 1 {
                let (_, better) = best_compound_expert(&data, LossSpec::Square, m + 1).unwrap();
                prop_assert!(better <= loss + 1e-12);
            }
        }
    }
}
