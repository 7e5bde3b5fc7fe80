//! Cross-module invariants of the policy loop: queue accounting,
//! comparator equivalences, and the pessimistic-estimate direction.

use cqbandit::algorithm::{
    pseudo_values, run, select_action, step_linear_cost, AlgState, PolicyKind,
};
use cqbandit::confidence::{pessimistic_cost, radius, ridge_init};
use cqbandit::dual::{dual_update, QueueVector, Schedule, ScheduleKind};
use cqbandit::instances::{
    mab_default, one_hot_linear_cost_instance, sample_round, synth_instance, RewardNoise, SynthSpec,
};
use cqbandit::metrics;
use cqbandit::rng::RunRng;

/// Instance whose every cost is -1: queues can never leave zero.
fn all_negative_cost_instance(horizon: usize) -> cqbandit::instances::Instance {
    synth_instance(
        &SynthSpec {
            n_contexts: 2,
            n_actions: 3,
            n_constraints: 1,
            feature_dim: Some(3),
            noise: RewardNoise::Gaussian { sigma: 0.3 },
            cost_range: (-1.0, -1.0),
            ensure_safe_action: false,
            horizon,
        },
        21,
    )
    .unwrap()
}

#[test]
fn zero_multiplier_runs_match_unconstrained_linucb() {
    let inst = all_negative_cost_instance(400);
    // eps_t = 1/sqrt(t) <= 1, so -1 + eps_t <= 0 and queues stay pinned at 0
    let schedule = Schedule::ExperimentWard;
    for seed in [1, 7, 23] {
        let constrained = run(
            &inst,
            PolicyKind::PessimisticOptimistic,
            schedule.clone(),
            seed,
        )
        .unwrap();
        let unconstrained = run(
            &inst,
            PolicyKind::LinUcbUnconstrained,
            schedule.clone(),
            seed,
        )
        .unwrap();
        assert!(constrained.queues.iter().all(|&q| q == 0.0));
        assert_eq!(constrained.action, unconstrained.action);
        assert_eq!(constrained.reward, unconstrained.reward);
    }
}

#[test]
fn argmax_invariant_under_common_scaling() {
    // scaling all queues and V by the same power of two cannot change the
    // selected action
    let rng = RunRng::new(5);
    let mut stream = rng.stream(0, cqbandit::rng::StreamPurpose::InstanceGen);
    use rand::Rng;
    for _ in 0..200 {
        let j_n = 1 + stream.gen_range(0..5);
        let k_n = 1 + stream.gen_range(0..3);
        let r_hat: Vec<f64> = (0..j_n).map(|_| stream.gen::<f64>()).collect();
        let costs: Vec<f64> = (0..j_n * k_n)
            .map(|_| 2.0 * stream.gen::<f64>() - 1.0)
            .collect();
        let q_raw: Vec<f64> = (0..k_n).map(|_| 10.0 * stream.gen::<f64>()).collect();
        let v = 0.1 + stream.gen::<f64>();
        let base = select_action(&pseudo_values(
            &r_hat,
            &costs,
            &QueueVector::from_values(q_raw.clone()),
            v,
        ));
        for lambda in [0.5, 2.0, 1024.0] {
            let scaled_q: Vec<f64> = q_raw.iter().map(|x| x * lambda).collect();
            let scaled = select_action(&pseudo_values(
                &r_hat,
                &costs,
                &QueueVector::from_values(scaled_q),
                v * lambda,
            ));
            assert_eq!(base, scaled);
        }
    }
}

#[test]
fn queue_column_reproduces_dual_update_fold() {
    for (inst, schedule) in [
        (mab_default(2_000), Schedule::ExperimentMab),
        (
            one_hot_linear_cost_instance(&[0.1, 0.2, 0.4, 0.7], &[-0.1, -0.2, 0.0, -0.7], 0.3, 500)
                .unwrap(),
            Schedule::ExperimentMab,
        ),
    ] {
        let traj = run(
            &inst,
            PolicyKind::PessimisticOptimistic,
            schedule.clone(),
            11,
        )
        .unwrap();
        let k_n = traj.n_constraints;
        let mut q = QueueVector::zeros(k_n);
        for t in 1..=traj.horizon {
            let costs: Vec<f64> = (0..k_n)
                .map(|k| traj.dual_costs[(t - 1) * k_n + k])
                .collect();
            q = dual_update(&q, &costs, schedule.eps(t));
            for k in 0..k_n {
                assert_eq!(q.values()[k], traj.queue(t, k), "t = {t}, k = {k}");
            }
        }
    }
}

#[test]
fn queue_telescoping_and_growth_bounds() {
    let inst = mab_default(3_000);
    let schedule = Schedule::ExperimentMab;
    for seed in 0..5 {
        let traj = run(
            &inst,
            PolicyKind::PessimisticOptimistic,
            schedule.clone(),
            seed,
        )
        .unwrap();
        let mut lower = 0.0; // sum of dual costs + eps
        let mut upper = 0.0; // sum of 1 + eps
        for t in 1..=traj.horizon {
            let eps = schedule.eps(t);
            lower += traj.dual_costs[t - 1] + eps;
            upper += 1.0 + eps;
            let q = traj.queue(t, 0);
            assert!(q >= lower - 1e-9, "t = {t}: q = {q} < telescoped {lower}");
            assert!(q <= upper + 1e-9, "t = {t}: q = {q} > growth bound {upper}");
        }
    }
}

#[test]
fn queue_over_sqrt_t_is_bounded_across_seeds() {
    // feasible instance with a strict margin: the normalized queue
    // statistic stays below a fixed constant on every seed
    let inst = mab_default(5_000);
    let schedule = Schedule::for_instance(ScheduleKind::TheoryMain, &inst);
    let t_min = schedule.tau_prime(inst.delta, inst.horizon).unwrap();
    let runs: Vec<_> = (0..50)
        .map(|s| {
            run(
                &inst,
                PolicyKind::PessimisticOptimistic,
                schedule.clone(),
                700 + s,
            )
            .unwrap()
        })
        .collect();
    let stat = metrics::queue_stats(&runs, t_min).unwrap();
    assert!(
        stat[0] < 4.0,
        "queue statistic {} unexpectedly large",
        stat[0]
    );
}

#[test]
fn pessimistic_estimates_stay_below_means() {
    // on the chosen action, the clipped pessimistic estimate should sit at
    // or below the true mean on at least 99% of (run, round) pairs
    let inst =
        one_hot_linear_cost_instance(&[0.1, 0.2, 0.4, 0.7], &[-0.1, -0.2, 0.0, -0.7], 0.3, 500)
            .unwrap();
    let schedule = Schedule::for_instance(ScheduleKind::TheoryLinearCost, &inst);
    let mut below = 0u64;
    let mut total = 0u64;
    for seed in 0..20 {
        let traj = run(
            &inst,
            PolicyKind::PessimisticOptimistic,
            schedule.clone(),
            300 + seed,
        )
        .unwrap();
        for t in 1..=traj.horizon {
            total += 1;
            if traj.dual_costs[t - 1] <= traj.mean_costs[t - 1] + 1e-12 {
                below += 1;
            }
        }
    }
    let rate = below as f64 / total as f64;
    assert!(
        rate >= 0.99,
        "estimate below mean on only {:.3}% of pairs",
        100.0 * rate
    );
}

#[test]
fn pessimistic_estimates_below_means_for_all_actions() {
    // stronger instrumentation: recompute the whole estimate row each
    // round before stepping
    let inst =
        one_hot_linear_cost_instance(&[0.1, 0.2, 0.4, 0.7], &[-0.1, -0.2, 0.0, -0.7], 0.3, 300)
            .unwrap();
    let schedule = Schedule::for_instance(ScheduleKind::TheoryLinearCost, &inst);
    let mut ok_pairs = 0u64;
    let mut total = 0u64;
    for seed in 0..10u64 {
        let rng = RunRng::new(4000 + seed);
        let mut state = AlgState::new(&inst, schedule.clone(), 1.0 / inst.horizon as f64);
        for t in 1..=inst.horizon {
            let obs = sample_round(&inst, &rng, t);
            let rad = radius(state.ridge_cost[0].n_updates(), inst.d(), 1.0, state.p);
            let all_below = (0..inst.n_actions()).all(|j| {
                let w_check = pessimistic_cost(
                    &state.ridge_cost[0],
                    &rad,
                    match &inst.cost {
                        cqbandit::instances::CostModel::Linear(models) => {
                            models[0].psi.get(obs.context, j)
                        }
                        _ => unreachable!(),
                    },
                );
                w_check <= inst.mean_cost(obs.context, j, 0) + 1e-12
            });
            total += 1;
            ok_pairs += u64::from(all_below);
            step_linear_cost(&mut state, &obs, &inst, &rng, false).unwrap();
        }
    }
    let rate = ok_pairs as f64 / total as f64;
    assert!(rate >= 0.99, "coverage rate {:.4}", rate);
}

#[test]
fn optimistic_estimates_dominate_means_under_coverage() {
    // per-round instrumentation: whenever the reward ellipsoid contains
    // theta_star, every action's optimistic estimate dominates its mean
    use cqbandit::algorithm::step;
    use cqbandit::confidence::{contains, optimistic_reward};
    let inst = mab_default(500);
    let schedule = Schedule::ExperimentMab;
    for seed in 0..5u64 {
        let rng = RunRng::new(800 + seed);
        let mut state = AlgState::new(&inst, schedule.clone(), 1.0 / inst.horizon as f64);
        for t in 1..=inst.horizon {
            let obs = sample_round(&inst, &rng, t);
            let rad = radius(
                state.ridge_reward.n_updates(),
                inst.d(),
                inst.reward.m,
                state.p,
            );
            if contains(&state.ridge_reward, &rad, &inst.reward.theta_star) {
                for j in 0..inst.n_actions() {
                    let opt = optimistic_reward(
                        &state.ridge_reward,
                        &rad,
                        inst.features.get(obs.context, j),
                    );
                    let mean = inst.mean_reward(obs.context, j);
                    assert!(opt >= mean - 1e-12, "t = {t}, j = {j}: {opt} < {mean}");
                }
            }
            step(&mut state, &obs, &inst, &rng, false).unwrap();
        }
    }
}

#[test]
fn pessimistic_estimate_converges_with_coverage() {
    // zero-noise observations on both basis directions drive the clipped
    // estimate to the true means
    let horizon = 10_000u64;
    let w = [-0.5, -0.25];
    let mut state = ridge_init(2);
    for i in 0..horizon {
        let j = (i % 2) as usize;
        let mut phi = [0.0; 2];
        phi[j] = 1.0;
        state.rank_one_update(&phi, w[j]).unwrap();
    }
    let rad = radius(state.n_updates(), 2, 1.0, 1.0 / horizon as f64);
    for j in 0..2 {
        let mut phi = [0.0; 2];
        phi[j] = 1.0;
        let est = pessimistic_cost(&state, &rad, &phi);
        assert!(
            (est - w[j]).abs() < 0.1,
            "arm {j}: estimate {est} vs mean {}",
            w[j]
        );
    }
}

#[test]
fn linear_variant_seed_determinism() {
    let inst =
        one_hot_linear_cost_instance(&[0.1, 0.2, 0.4, 0.7], &[-0.1, -0.2, 0.0, -0.7], 0.3, 400)
            .unwrap();
    let schedule = Schedule::for_instance(ScheduleKind::TheoryLinearCost, &inst);
    let a = run(
        &inst,
        PolicyKind::PessimisticOptimistic,
        schedule.clone(),
        9,
    )
    .unwrap();
    let b = run(&inst, PolicyKind::PessimisticOptimistic, schedule, 9).unwrap();
    assert_eq!(a, b);
}

#[test]
fn oracle_lp_regret_centers_on_zero() {
    // a two-context instance whose optimum mixes actions: the oracle
    // policy's regret fluctuates around zero within sampling error
    let inst = synth_instance(
        &SynthSpec {
            n_contexts: 2,
            n_actions: 3,
            n_constraints: 1,
            feature_dim: None,
            noise: RewardNoise::BernoulliResidual,
            cost_range: (-0.3, 0.6),
            ensure_safe_action: true,
            horizon: 10_000,
        },
        77,
    )
    .unwrap();
    let opt = cqbandit::oracle::solve_baseline(&inst).objective;
    let runs: Vec<_> = (0..50)
        .map(|s| {
            run(
                &inst,
                PolicyKind::OracleLp,
                Schedule::ExperimentMab,
                500 + s,
            )
            .unwrap()
        })
        .collect();
    let (regret, stderr) = metrics::regret_curve_with_stderr(&runs, opt).unwrap();
    let last = inst.horizon - 1;
    assert!(
        regret[last].abs() <= 4.0 * stderr[last].max(1e-12),
        "oracle regret {} vs stderr {}",
        regret[last],
        stderr[last]
    );
}

#[test]
fn uniform_policy_regret_rate_on_benchmark() {
    let inst = mab_default(100_000);
    let traj = run(&inst, PolicyKind::Uniform, Schedule::ExperimentMab, 2).unwrap();
    let (regret, _) = metrics::regret_curve_with_stderr(&[traj], 0.7).unwrap();
    let rate = regret[inst.horizon - 1] / inst.horizon as f64;
    assert!((rate - 0.35).abs() < 0.01, "uniform regret rate {rate}");
}

#[test]
fn mab_delta_matches_lp_margin() {
    let inst = mab_default(10);
    let margin = cqbandit::oracle::slater_margin(&inst).unwrap();
    assert_eq!(inst.delta, margin);
}

#[test]
fn comparator_policies_work_on_linear_instances() {
    // uniform and oracle-lp need post-action cost realizations when the
    // cost model is linear
    let inst =
        one_hot_linear_cost_instance(&[0.1, 0.2, 0.4, 0.7], &[-0.1, -0.2, 0.0, -0.7], 0.3, 2_000)
            .unwrap();
    let uni = run(&inst, PolicyKind::Uniform, Schedule::ExperimentMab, 5).unwrap();
    assert_eq!(uni.n_rounds(), 2_000);
    let mean: f64 = uni.mean_reward.iter().sum::<f64>() / 2_000.0;
    assert!((mean - 0.35).abs() < 0.05, "uniform mean reward {mean}");
    // realized costs carry the configured noise around the means
    let mean_cost: f64 = uni.costs.iter().sum::<f64>() / 2_000.0;
    let mean_model: f64 = uni.mean_costs.iter().sum::<f64>() / 2_000.0;
    assert!((mean_cost - mean_model).abs() < 0.05);

    let lp = run(&inst, PolicyKind::OracleLp, Schedule::ExperimentMab, 5).unwrap();
    // the LP optimum is the pure cheapest-and-best arm here
    assert!(lp.mean_reward.iter().all(|&r| (r - 0.7).abs() < 1e-12));
}

#[test]
fn aggregate_bundle_matches_individual_curves() {
    let inst = mab_default(500);
    let runs: Vec<_> = (0..4)
        .map(|s| {
            run(
                &inst,
                PolicyKind::PessimisticOptimistic,
                Schedule::ExperimentMab,
                s,
            )
            .unwrap()
        })
        .collect();
    let bundle = metrics::AggregateCurves::compute(&runs, 0.7, Some(96), false).unwrap();
    assert_eq!(bundle.n_runs, 4);
    assert_eq!(bundle.regret, metrics::regret_curve(&runs, 0.7).unwrap());
    assert_eq!(bundle.violation, metrics::violation_curve(&runs).unwrap());
    assert_eq!(
        bundle.pathwise_violation_freq[0],
        metrics::pathwise_violation_freq(&runs, 0).unwrap()
    );
    assert_eq!(
        bundle.queue_over_sqrt_t,
        Some(metrics::queue_stats(&runs, 96).unwrap())
    );
    // t_min beyond the horizon: statistic undefined
    let no_stat = metrics::AggregateCurves::compute(&runs, 0.7, Some(10_000), false).unwrap();
    assert_eq!(no_stat.queue_over_sqrt_t, None);
}
