mod support;

use std::sync::Arc;

use cbwk::policy::{stop_threshold, EstimatorConfig, Policy, ReSolvingPolicy};
use cbwk::presets;
use cbwk::rng;
use cbwk::simulator::{run_trial_observed, Environment, PolicyKind, RoundRecord};
use cbwk::{Factor, FeedbackMode, Outcome, ProblemInstance};
use proptest::prelude::*;

/// `(ρ_t, c_t)` for every executed round.
fn rates_and_costs(inst: &Arc<ProblemInstance>, mode: FeedbackMode, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rows = Vec::new();
    run_trial_observed(inst, mode, &PolicyKind::default(), seed, |r: &RoundRecord<'_>| {
        rows.push((r.decision.rate.clone(), r.outcome.consumption.clone()));
    })
    .unwrap();
    rows
}

/// Largest relative gap between the ledger's `ρ_{t+1}` and
/// `ρ_t + (ρ_t − c_t)/(T − t)`.
pub fn recurrence_gap(rows: &[(Vec<f64>, Vec<f64>)], horizon: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for (t, pair) in rows.windows(2).enumerate() {
        let t = t as u64 + 1;
        let (rho, c) = &pair[0];
        let next = &pair[1].0;
        for i in 0..rho.len() {
            let want = rho[i] + (rho[i] - c[i]) / (horizon - t) as f64;
            worst = worst.max((next[i] - want).abs() / want.abs().max(1.0));
        }
    }
    worst
}

#[test]
fn recurrence_on_presets() {
    for inst in [presets::benchmark_nondegenerate(), presets::benchmark_degenerate()] {
        let inst = Arc::new(inst.with_horizon(2000).unwrap());
        for mode in [FeedbackMode::FullInfo, FeedbackMode::PartialInfo] {
            let rows = rates_and_costs(&inst, mode, 5);
            assert!(rows.len() > 1900);
            assert!(recurrence_gap(&rows, 2000) <= 1e-12);
        }
    }
}

#[test]
fn forced_action_feedback_equivalence() {
    // budgets never bind, so φ̂ ≡ 1 and every round is active
    let inst = Arc::new(presets::benchmark_nondegenerate().with_rho(vec![50.0, 50.0]).unwrap().with_horizon(400).unwrap());
    let env = Environment::new(&inst).unwrap();
    let mut full = ReSolvingPolicy::new(Arc::clone(&inst), FeedbackMode::FullInfo, EstimatorConfig::default()).unwrap();
    let mut partial = ReSolvingPolicy::new(Arc::clone(&inst), FeedbackMode::PartialInfo, EstimatorConfig::default()).unwrap();
    let mut rng_f = rng::stream(77, &[]);
    let mut rng_p = rng::stream(77, &[]);
    let mut out = Outcome::zero(2);
    let mut point = [];
    for _ in 0..400 {
        let ctx = env.sample_context(&mut rng_f);
        assert_eq!(ctx, env.sample_context(&mut rng_p));
        let g = env.sample_factor(&mut rng_f, &mut point);
        let Factor::Label(label) = g else { unreachable!() };
        assert!(matches!(env.sample_factor(&mut rng_p, &mut []), Factor::Label(l) if l == label));
        let df = full.step(ctx, &mut rng_f);
        let dp = partial.step(ctx, &mut rng_p);
        assert_eq!(df.phi_at_context, 1.0, "{df:?}");
        assert_eq!(df.action, dp.action);
        out.reward = inst.evaluate_into(ctx, df.action, g, &mut out.consumption);
        full.observe(&df, ctx, g, &out);
        partial.observe(&dp, ctx, g, &out);
        assert_eq!(full.factor_estimator(), partial.factor_estimator());
    }
    assert_eq!(partial.observed_factors(), 400);
}

#[test]
fn partial_feedback_accrues_samples() {
    let horizon = 20_000u64;
    let inst = Arc::new(presets::benchmark_nondegenerate().with_horizon(horizon).unwrap());
    let lo = horizon / 10;
    let hi = 4 * horizon / 10;
    let mut good = 0;
    for trial in 0..100u64 {
        // observed[t] = Y_{t+1}, factors seen after round t
        let mut observed = vec![0u64; horizon as usize + 1];
        run_trial_observed(
            &inst,
            FeedbackMode::PartialInfo,
            &PolicyKind::default(),
            rng::stream_key(31, &[trial]),
            |r: &RoundRecord<'_>| observed[r.round as usize] = r.observed_factors,
        )
        .unwrap();
        let ok = (lo..=hi).all(|t| observed[t as usize - 1] as f64 / (t - 1) as f64 > 0.2);
        good += ok as u32;
    }
    assert!(good >= 95, "{good} of 100 trials kept Y_t/(t-1) > 0.2");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn recurrence_on_random_instances(seed in any::<u64>(), partial in any::<bool>()) {
        let mut r = rng::stream(seed, &[1]);
        let inst = Arc::new(support::random_instance(&mut r, 300));
        let mode = if partial { FeedbackMode::PartialInfo } else { FeedbackMode::FullInfo };
        let rows = rates_and_costs(&inst, mode, seed);
        prop_assert!(recurrence_gap(&rows, 300) <= 1e-12);
    }

    #[test]
    fn never_overdraws(seed in any::<u64>()) {
        let mut r = rng::stream(seed, &[2]);
        let inst = Arc::new(support::random_instance(&mut r, 400));
        let floor = stop_threshold(&inst) - inst.c_max();
        let mut last = inst.rho().iter().map(|x| x * 400.0).collect::<Vec<_>>();
        run_trial_observed(&inst, FeedbackMode::FullInfo, &PolicyKind::default(), seed, |rec: &RoundRecord<'_>| {
            last = rec.remaining.to_vec();
        })
        .unwrap();
        prop_assert!(floor >= 0.0);
        prop_assert!(last.iter().all(|b| *b >= floor - 1e-9), "{last:?}");
    }

    #[test]
    fn trajectories_are_deterministic(seed in any::<u64>()) {
        let inst = Arc::new(presets::benchmark_degenerate().with_horizon(300).unwrap());
        let record = || {
            let mut rows = Vec::new();
            let res = run_trial_observed(&inst, FeedbackMode::PartialInfo, &PolicyKind::default(), seed, |r: &RoundRecord<'_>| {
                rows.push((r.context, r.decision.action, r.outcome.reward, r.remaining.to_vec()));
            })
            .unwrap();
            (rows, res)
        };
        prop_assert_eq!(record(), record());
    }
}
