//! The acceptance battery behind `cqbandit verify` and the `acceptance`
//! integration test target.
//!
//! Each criterion is a self-contained check with pinned tolerances; the
//! full suite uses the reference parameters, the quick suite shrinks
//! seeds and horizons for a fast smoke signal. Criteria report a measured
//! detail string so failures are diagnosable from the one-line output.

use rayon::prelude::*;

use crate::algorithm::{run_with_options, PolicyKind, RunOptions, Trajectory};
use crate::config::{ExperimentConfig, ScheduleSpec, SeedSpec};
use crate::dual::{Schedule, ScheduleKind};
use crate::instances::{
    mab_default, one_hot_linear_cost_instance, synth_instance, Instance, RewardNoise, SynthSpec,
};
use crate::linalg::norm2;
use crate::metrics;
use crate::oracle::{self, LpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Quick,
    Full,
}

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl CriterionResult {
    fn new(id: u32, name: &'static str, pass: bool, detail: String) -> Self {
        CriterionResult {
            id,
            name,
            pass,
            detail,
        }
    }
}

pub fn schedule_from_spec(spec: &ScheduleSpec, instance: &Instance) -> Schedule {
    match (spec.kind, spec.custom) {
        (ScheduleKind::Custom, Some((v_coef, eps_coef))) => Schedule::Custom { v_coef, eps_coef },
        (kind, _) => Schedule::for_instance(kind, instance),
    }
}

fn parallel_runs(
    instance: &Instance,
    policy: PolicyKind,
    schedule: Schedule,
    base_seed: u64,
    n_seeds: usize,
    opts: &RunOptions,
) -> Vec<Trajectory> {
    (0..n_seeds as u64)
        .into_par_iter()
        .map(|i| {
            run_with_options(instance, policy, schedule.clone(), base_seed + i, opts)
                .expect("run failed")
        })
        .collect()
}

struct Params {
    c12_seeds: usize,
    c12_horizon: usize,
    c12_window: (usize, usize),
    c3_seeds: usize,
    c3_horizon: usize,
    c3_checkpoints: [usize; 3],
    c4_seeds: usize,
    c4_horizon: usize,
    c5_runs: usize,
    c67_instances: usize,
    c7_grid: usize,
    c8_max_horizon: usize,
    c9_seeds: usize,
    c9_horizon: usize,
    c9_window: (usize, usize),
    c9_zero_cap: usize,
    c10_horizon: usize,
    c10_seeds: usize,
}

impl Params {
    fn for_suite(suite: Suite) -> Params {
        match suite {
            Suite::Full => Params {
                c12_seeds: 50,
                c12_horizon: 100_000,
                c12_window: (1_000, 100_000),
                c3_seeds: 200,
                c3_horizon: 10_000,
                c3_checkpoints: [100, 1_000, 10_000],
                c4_seeds: 20,
                c4_horizon: 10_000,
                c5_runs: 1_000,
                c67_instances: 100,
                c7_grid: 10,
                c8_max_horizon: 6,
                c9_seeds: 50,
                c9_horizon: 100_000,
                c9_window: (1_000, 100_000),
                c9_zero_cap: 20_000,
                c10_horizon: 2_000,
                c10_seeds: 5,
            },
            Suite::Quick => Params {
                c12_seeds: 8,
                c12_horizon: 20_000,
                c12_window: (1_000, 20_000),
                c3_seeds: 50,
                c3_horizon: 2_000,
                c3_checkpoints: [100, 1_000, 2_000],
                c4_seeds: 8,
                c4_horizon: 4_000,
                c5_runs: 200,
                c67_instances: 30,
                c7_grid: 5,
                c8_max_horizon: 5,
                c9_seeds: 8,
                c9_horizon: 20_000,
                c9_window: (1_000, 20_000),
                c9_zero_cap: 20_000,
                c10_horizon: 500,
                c10_seeds: 3,
            },
        }
    }
}

fn mab_runs(seeds: usize, base_seed: u64, horizon: usize) -> Vec<Trajectory> {
    let instance = mab_default(horizon);
    parallel_runs(
        &instance,
        PolicyKind::PessimisticOptimistic,
        Schedule::ExperimentMab,
        base_seed,
        seeds,
        &RunOptions::default(),
    )
}

/// The linear-cost benchmark instance: one-hot d = 4, the best-reward arm
/// is also the cheapest, delta = 0.7 equals the Slater margin.
fn linear_cost_benchmark(horizon: usize) -> Instance {
    one_hot_linear_cost_instance(
        &[0.1, 0.2, 0.4, 0.7],
        &[-0.1, -0.2, 0.0, -0.7],
        0.3,
        horizon,
    )
    .expect("benchmark instance is valid")
}

// --- criterion 1: sqrt-rate regret slope -----------------------------------

fn criterion_1_impl(runs: &[Trajectory], window: (usize, usize)) -> CriterionResult {
    let opt = 0.7;
    let (regret, _) = metrics::regret_curve_with_stderr(runs, opt).expect("regret");
    let positive: Vec<f64> = regret.iter().map(|&r| r.max(0.0)).collect();
    match metrics::loglog_slope(&positive, window) {
        Ok(slope) => CriterionResult::new(
            1,
            "regret slope in [0.40, 0.65]",
            (0.40..=0.65).contains(&slope),
            format!(
                "measured slope {slope:.3} over [{}, {}], final regret {:.1}",
                window.0,
                window.1,
                regret[regret.len() - 1]
            ),
        ),
        Err(e) => CriterionResult::new(1, "regret slope in [0.40, 0.65]", false, e.to_string()),
    }
}

pub fn criterion_1(suite: Suite) -> CriterionResult {
    let p = Params::for_suite(suite);
    let runs = mab_runs(p.c12_seeds, 1000, p.c12_horizon);
    criterion_1_impl(&runs, p.c12_window)
}

// --- criterion 2: zero expected violation after a bounded round -------------

fn criterion_2_impl(runs: &[Trajectory]) -> CriterionResult {
    let violation = metrics::violation_curve(runs).expect("violation");
    match metrics::zero_violation_from(&violation) {
        Some(tau_hat) => CriterionResult::new(
            2,
            "violation zero from tau_hat <= 2000",
            tau_hat <= 2000,
            format!("violation zero from tau = {tau_hat} through T"),
        ),
        None => CriterionResult::new(
            2,
            "violation zero from tau_hat <= 2000",
            false,
            format!(
                "violation still positive at T (V = {:.4})",
                violation[violation.len() - 1]
            ),
        ),
    }
}

pub fn criterion_2(suite: Suite) -> CriterionResult {
    let p = Params::for_suite(suite);
    let runs = mab_runs(p.c12_seeds, 1000, p.c12_horizon);
    criterion_2_impl(&runs)
}

// --- criterion 3: pathwise violation tail decay ------------------------------

pub fn criterion_3(suite: Suite) -> CriterionResult {
    let p = Params::for_suite(suite);
    let runs = mab_runs(p.c3_seeds, 3000, p.c3_horizon);
    let freq = metrics::pathwise_violation_freq(&runs, 0).expect("freq");
    let at = |tau: usize| freq[tau - 1];
    let [t1, t2, t3] = p.c3_checkpoints;
    let nonincreasing = at(t1) >= at(t2) && at(t2) >= at(t3);
    let tail_ok = at(t3) <= 0.05;
    CriterionResult::new(
        3,
        "pathwise violation tail decays",
        nonincreasing && tail_ok,
        format!(
            "freq({t1}) = {:.3}, freq({t2}) = {:.3}, freq({t3}) = {:.3}",
            at(t1),
            at(t2),
            at(t3)
        ),
    )
}

// --- criterion 4: queue statistic stable when T doubles ----------------------

pub fn criterion_4(suite: Suite) -> CriterionResult {
    let p = Params::for_suite(suite);
    let run_set = |horizon: usize| {
        let instance = mab_default(horizon);
        let schedule = Schedule::for_instance(ScheduleKind::TheoryMain, &instance);
        let t_min = schedule
            .tau_prime(instance.delta, horizon)
            .expect("tau_prime within horizon");
        let runs = parallel_runs(
            &instance,
            PolicyKind::PessimisticOptimistic,
            schedule,
            4000,
            p.c4_seeds,
            &RunOptions::default(),
        );
        metrics::queue_stats(&runs, t_min).expect("queue stats")
    };
    let short = run_set(p.c4_horizon);
    let long = run_set(2 * p.c4_horizon);
    let mut worst_ratio: f64 = 1.0;
    for (s, l) in short.iter().zip(&long) {
        let ratio = if *s < 1e-12 && *l < 1e-12 {
            1.0
        } else {
            l / s.max(1e-12)
        };
        if (ratio - 1.0).abs() > (worst_ratio - 1.0).abs() {
            worst_ratio = ratio;
        }
    }
    CriterionResult::new(
        4,
        "queue stat changes < x2 when T doubles",
        worst_ratio < 2.0 && worst_ratio > 0.5,
        format!(
            "max Q/sqrt(t): T = {} gives {:.3}, 2T gives {:.3} (ratio {:.3})",
            p.c4_horizon, short[0], long[0], worst_ratio
        ),
    )
}

// --- criterion 5: confidence coverage ----------------------------------------

pub fn criterion_5(suite: Suite) -> CriterionResult {
    let p = Params::for_suite(suite);
    let horizon = 1_000;
    let instance = synth_instance(
        &SynthSpec {
            n_contexts: 3,
            n_actions: 5,
            n_constraints: 1,
            feature_dim: Some(4),
            noise: RewardNoise::Gaussian { sigma: 1.0 },
            cost_range: (-0.6, -0.1),
            ensure_safe_action: true,
            horizon,
        },
        500,
    )
    .expect("coverage instance");
    let schedule = Schedule::for_instance(ScheduleKind::TheoryMain, &instance);
    let opts = RunOptions {
        trace_confidence: true,
        confidence_p: None, // 1/T
    };
    let covered: usize = (0..p.c5_runs as u64)
        .into_par_iter()
        .map(|i| {
            let traj = run_with_options(
                &instance,
                PolicyKind::PessimisticOptimistic,
                schedule.clone(),
                5000 + i,
                &opts,
            )
            .expect("run");
            let (betas, errs) = traj.confidence.as_ref().expect("trace");
            let ok = betas.iter().zip(errs).all(|(b, e)| e <= b);
            usize::from(ok)
        })
        .sum();
    let rate = covered as f64 / p.c5_runs as f64;
    CriterionResult::new(
        5,
        "theta_star coverage >= 99%",
        rate >= 0.99,
        format!(
            "{covered}/{} runs fully covered ({:.2}%)",
            p.c5_runs,
            100.0 * rate
        ),
    )
}

// --- criteria 6-7: LP oracle checks ------------------------------------------

fn tiny_instances(n: usize) -> Vec<Instance> {
    (0..n as u64)
        .map(|s| {
            let spec = SynthSpec {
                n_contexts: 1 + (s as usize % 2),
                n_actions: 1 + (s as usize % 3),
                n_constraints: 1 + (s as usize / 3 % 2),
                feature_dim: None,
                noise: RewardNoise::BernoulliResidual,
                cost_range: (-0.8, 0.8),
                ensure_safe_action: s % 4 != 0,
                horizon: 10,
            };
            synth_instance(&spec, 6000 + s).expect("tiny instance")
        })
        .collect()
}

pub fn criterion_6(suite: Suite) -> CriterionResult {
    let p = Params::for_suite(suite);
    let mut worst = 0.0f64;
    for inst in tiny_instances(p.c67_instances) {
        let lp = oracle::solve_baseline(&inst);
        match oracle::brute_force_value(&inst, 0.0) {
            Ok(v) => {
                if lp.status != LpStatus::Optimal {
                    return CriterionResult::new(
                        6,
                        "simplex matches enumeration",
                        false,
                        format!(
                            "{}: enumeration feasible but simplex infeasible",
                            inst.label
                        ),
                    );
                }
                worst = worst.max((lp.objective - v).abs());
            }
            Err(oracle::OracleError::Infeasible) => {
                if lp.status != LpStatus::Infeasible {
                    return CriterionResult::new(
                        6,
                        "simplex matches enumeration",
                        false,
                        format!(
                            "{}: simplex feasible but enumeration infeasible",
                            inst.label
                        ),
                    );
                }
            }
            Err(e) => {
                return CriterionResult::new(6, "simplex matches enumeration", false, e.to_string())
            }
        }
    }
    let mab = mab_default(10);
    let mab_obj = oracle::solve_baseline(&mab).objective;
    let mab_margin = oracle::slater_margin(&mab).expect("margin");
    let exact = mab_obj == 0.7 && mab_margin == 0.5;
    CriterionResult::new(
        6,
        "simplex matches enumeration; benchmark values exact",
        worst < 1e-7 && exact,
        format!(
            "max |simplex - enumeration| = {worst:.2e}; benchmark objective {mab_obj}, margin {mab_margin}"
        ),
    )
}

pub fn criterion_7(suite: Suite) -> CriterionResult {
    let p = Params::for_suite(suite);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut checked = 0;
    for inst in tiny_instances(p.c67_instances) {
        let Ok(delta_star) = oracle::slater_margin(&inst) else {
            continue;
        };
        if delta_star < 1e-9 {
            continue;
        }
        let base = oracle::solve_baseline(&inst).objective;
        for i in 0..=p.c7_grid {
            let eps = delta_star * i as f64 / p.c7_grid as f64;
            let t = oracle::solve_tightened(&inst, eps);
            if t.status != LpStatus::Optimal {
                return CriterionResult::new(
                    7,
                    "tightening gap bounded by eps/delta",
                    false,
                    format!(
                        "{}: infeasible at eps = {eps} <= delta* = {delta_star}",
                        inst.label
                    ),
                );
            }
            worst_excess = worst_excess.max(base - t.objective - eps / delta_star);
            checked += 1;
        }
    }
    CriterionResult::new(
        7,
        "tightening gap bounded by eps/delta",
        worst_excess <= 1e-9,
        format!("{checked} grid points, worst gap excess {worst_excess:.2e}"),
    )
}

// --- criterion 8: no policy beats T times the LP value -----------------------

fn tiny_tabular_instance(r: &[f64], w_per_k: &[Vec<f64>], horizon: usize) -> Instance {
    use crate::instances::{
        ContextDistribution, CostModel, FeatureMap, RewardModel, TabularCost, TabularDist,
    };
    let j_n = r.len();
    let dists: Vec<TabularDist> = w_per_k
        .iter()
        .flat_map(|row| {
            row.iter()
                .map(|&value| TabularDist::Deterministic { value })
        })
        .collect();
    Instance::new(
        "tiny",
        ContextDistribution::new(vec![1.0]).unwrap(),
        FeatureMap::one_hot(1, j_n),
        RewardModel::new(r.to_vec(), norm2(r), RewardNoise::BernoulliResidual).unwrap(),
        CostModel::Tabular(TabularCost::new(w_per_k.len(), 1, j_n, dists).unwrap()),
        horizon,
        0.5,
    )
    .unwrap()
}

/// Best total mean reward over all action sequences whose deterministic
/// cumulative costs stay nonpositive at every prefix.
///
/// With a single context, deterministic costs, and fixed means, reward
/// feedback affects neither feasibility nor expected reward, so
/// deterministic history-dependent policies collapse to action sequences
/// (randomized policies are mixtures of these and cannot do better in
/// expectation).
fn best_feasible_sequence(inst: &Instance, horizon: usize) -> f64 {
    let j_n = inst.n_actions();
    let k_n = inst.n_constraints();
    fn rec(
        inst: &Instance,
        t: usize,
        horizon: usize,
        cum: &mut Vec<f64>,
        total: f64,
        best: &mut f64,
        j_n: usize,
        k_n: usize,
    ) {
        if t == horizon {
            if total > *best {
                *best = total;
            }
            return;
        }
        for j in 0..j_n {
            let mut ok = true;
            for k in 0..k_n {
                if cum[k] + inst.mean_cost(0, j, k) > 1e-12 {
                    ok = false;
                    break;
                }
            }
            if !ok {
                continue;
            }
            for k in 0..k_n {
                cum[k] += inst.mean_cost(0, j, k);
            }
            rec(
                inst,
                t + 1,
                horizon,
                cum,
                total + inst.mean_reward(0, j),
                best,
                j_n,
                k_n,
            );
            for k in 0..k_n {
                cum[k] -= inst.mean_cost(0, j, k);
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    let mut cum = vec![0.0; k_n];
    rec(inst, 0, horizon, &mut cum, 0.0, &mut best, j_n, k_n);
    best
}

pub fn criterion_8(suite: Suite) -> CriterionResult {
    let p = Params::for_suite(suite);
    let cases: Vec<(Vec<f64>, Vec<Vec<f64>>)> = vec![
        (vec![1.0, 0.0], vec![vec![1.0, -1.0]]),
        (vec![0.9, 0.4, 0.1], vec![vec![0.5, -0.25, -1.0]]),
        (
            vec![0.8, 0.6, 0.2],
            vec![vec![0.6, -0.2, -0.7], vec![-0.3, 0.4, -0.5]],
        ),
        (vec![0.7, 0.3], vec![vec![0.2, -0.1]]),
    ];
    let mut worst = f64::NEG_INFINITY;
    for (r, w) in &cases {
        for horizon in [2, p.c8_max_horizon.min(4), p.c8_max_horizon] {
            let inst = tiny_tabular_instance(r, w, horizon);
            let lp = oracle::solve_baseline(&inst);
            assert_eq!(lp.status, LpStatus::Optimal);
            let best = best_feasible_sequence(&inst, horizon);
            worst = worst.max(best - horizon as f64 * lp.objective);
        }
    }
    CriterionResult::new(
        8,
        "no feasible policy beats T * LP value",
        worst <= 1e-9,
        format!("worst (best sequence - T * LP) = {worst:.2e}"),
    )
}

// --- criterion 9: linear-cost variant sanity ---------------------------------

fn criterion_9_impl(
    runs: &[Trajectory],
    opt: f64,
    window: (usize, usize),
    zero_cap: usize,
) -> CriterionResult {
    let (regret, _) = metrics::regret_curve_with_stderr(runs, opt).expect("regret");
    let positive: Vec<f64> = regret.iter().map(|&r| r.max(0.0)).collect();
    let slope = metrics::loglog_slope(&positive, window);
    let violation = metrics::violation_curve(runs).expect("violation");
    let zero_from = metrics::zero_violation_from(&violation);
    let slope_ok = matches!(slope, Ok(s) if (0.40..=0.70).contains(&s));
    let zero_ok = matches!(zero_from, Some(t) if t <= zero_cap);
    let slope_str = match &slope {
        Ok(s) => format!("{s:.3}"),
        Err(e) => e.to_string(),
    };
    CriterionResult::new(
        9,
        "linear-cost variant: slope in [0.40, 0.70], violation zero by cap",
        slope_ok && zero_ok,
        format!(
            "slope {slope_str}; violation zero from {:?} (cap {zero_cap}); final regret {:.1}",
            zero_from,
            regret[regret.len() - 1]
        ),
    )
}

pub fn criterion_9(suite: Suite) -> CriterionResult {
    let p = Params::for_suite(suite);
    let instance = linear_cost_benchmark(p.c9_horizon);
    let schedule = Schedule::for_instance(ScheduleKind::TheoryLinearCost, &instance);
    let runs = parallel_runs(
        &instance,
        PolicyKind::PessimisticOptimistic,
        schedule,
        9000,
        p.c9_seeds,
        &RunOptions::default(),
    );
    let opt = oracle::solve_baseline(&instance).objective;
    criterion_9_impl(&runs, opt, p.c9_window, p.c9_zero_cap)
}

// --- criterion 10: byte-identical reruns -------------------------------------

pub fn criterion_10(suite: Suite) -> CriterionResult {
    let p = Params::for_suite(suite);
    let dir = match tempdir_in_target() {
        Ok(d) => d,
        Err(e) => return CriterionResult::new(10, "byte-identical reruns", false, e),
    };
    let mut config = ExperimentConfig {
        horizon: p.c10_horizon,
        seeds: SeedSpec::Base {
            base_seed: 42,
            replications: p.c10_seeds,
        },
        write_trajectories: false,
        ..ExperimentConfig::default()
    };
    let mut outputs = Vec::new();
    for sub in ["a", "b"] {
        config.output_dir = dir.join(sub);
        match crate::cli::cmd_run(&config) {
            Ok(artifacts) => {
                let bytes = std::fs::read(&artifacts.aggregate_csv_path).unwrap_or_default();
                outputs.push(bytes);
            }
            Err(e) => {
                return CriterionResult::new(10, "byte-identical reruns", false, e.to_string())
            }
        }
    }
    let identical = outputs[0] == outputs[1];
    let _ = std::fs::remove_dir_all(&dir);
    CriterionResult::new(
        10,
        "byte-identical reruns",
        identical,
        format!(
            "aggregate CSV: {} bytes vs {} bytes, identical = {identical}",
            outputs[0].len(),
            outputs[1].len()
        ),
    )
}

fn tempdir_in_target() -> Result<std::path::PathBuf, String> {
    let base = std::env::temp_dir().join(format!(
        "cqbandit-verify-{}-{}",
        std::process::id(),
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or(0)
    ));
    std::fs::create_dir_all(&base).map_err(|e| e.to_string())?;
    Ok(base)
}

/// Run the whole battery, sharing run sets where criteria pin the same
/// configuration.
pub fn run_suite(suite: Suite) -> Vec<CriterionResult> {
    let p = Params::for_suite(suite);
    let mab = mab_runs(p.c12_seeds, 1000, p.c12_horizon);
    let mut results = vec![criterion_1_impl(&mab, p.c12_window), criterion_2_impl(&mab)];
    drop(mab);
    results.push(criterion_3(suite));
    results.push(criterion_4(suite));
    results.push(criterion_5(suite));
    results.push(criterion_6(suite));
    results.push(criterion_7(suite));
    results.push(criterion_8(suite));
    results.push(criterion_9(suite));
    results.push(criterion_10(suite));
    results
}
