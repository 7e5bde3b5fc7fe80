//! Experiment orchestration and CSV emission behind the `cqbandit` binary.
//!
//! `run` executes replications in parallel (one worker per replication,
//! counter-based streams keep results independent of scheduling), writes
//! per-run trajectory CSVs plus an aggregate CSV, and prints a JSON
//! summary. `baseline` fronts the LP oracle, `instance validate` checks an
//! instance file, and `verify` runs the acceptance battery.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::algorithm::{run_with_options, AlgorithmError, RunOptions, Trajectory};
use crate::config::{ExperimentConfig, InstanceSpec};
use crate::dual::Schedule;
use crate::instances::{self, Instance};
use crate::metrics;
use crate::oracle::{self, LpStatus};
use crate::verify::{self, Suite};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) | CliError::Infeasible(_) => 2,
            CliError::Usage(_) => 64,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Float formatting used in every CSV: 17 significant digits, enough to
/// round-trip f64 bit-exactly.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn load_instance(config: &ExperimentConfig) -> Result<Instance, CliError> {
    let inst = match &config.instance {
        InstanceSpec::Mab => instances::mab_default(config.horizon),
        InstanceSpec::Ward => instances::ward_default(config.instance_seed, config.horizon),
        InstanceSpec::File(path) => instances::instance_from_file(path, Some(config.horizon))
            .map_err(|e| match e {
                instances::InstanceError::Parse(msg) if msg.contains("No such file") => {
                    CliError::Io(msg)
                }
                other => CliError::Validation(other.to_string()),
            })?,
    };
    match config.delta_override {
        Some(delta) => inst
            .with_delta(delta)
            .map_err(|e| CliError::Validation(e.to_string())),
        None => Ok(inst),
    }
}

pub struct RunArtifacts {
    pub aggregate_csv_path: PathBuf,
    pub summary_json: String,
}

pub fn cmd_run(config: &ExperimentConfig) -> Result<RunArtifacts, CliError> {
    config
        .validate()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let instance = load_instance(config)?;
    let schedule = crate::verify::schedule_from_spec(&config.schedule, &instance);
    let seeds = config.seeds.seeds();
    let opts = RunOptions {
        trace_confidence: config.trace_confidence,
        confidence_p: config.confidence_p,
    };

    let workers = if config.workers == 0 {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    } else {
        config.workers
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;

    let runs: Result<Vec<Trajectory>, CliError> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                run_with_options(&instance, config.policy, schedule.clone(), seed, &opts).map_err(
                    |e| match e {
                        AlgorithmError::LpInfeasible => CliError::Infeasible(e.to_string()),
                        other => CliError::Validation(other.to_string()),
                    },
                )
            })
            .collect()
    });
    let runs = runs?;

    std::fs::create_dir_all(&config.output_dir)?;
    if config.write_trajectories {
        for traj in &runs {
            let path = config
                .output_dir
                .join(format!("trajectory_seed{}.csv", traj.seed));
            std::fs::write(&path, trajectory_csv(traj))?;
        }
    }

    let baseline = oracle::solve_baseline(&instance);
    if baseline.status == LpStatus::Infeasible {
        return Err(CliError::Infeasible(
            "baseline LP infeasible; regret undefined".into(),
        ));
    }
    let opt = baseline.objective;

    let tau_prime = schedule.tau_prime(instance.delta, instance.horizon);
    let curves = metrics::AggregateCurves::compute(&runs, opt, tau_prime, config.realized_regret)
        .map_err(|e| CliError::Validation(e.to_string()))?;

    let aggregate_csv_path = config.output_dir.join("aggregate.csv");
    std::fs::write(&aggregate_csv_path, aggregate_csv(&curves))?;

    let summary_json = summary_json(&instance, config, &schedule, tau_prime, opt, &curves);
    Ok(RunArtifacts {
        aggregate_csv_path,
        summary_json,
    })
}

/// One row per round: t, context, action, reward, per-constraint realized
/// costs, queues, then running totals. Confidence trace columns are
/// appended when the run recorded them.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let k_n = traj.n_constraints;
    let mut header = String::from("t,context,action,reward");
    for k in 1..=k_n {
        let _ = write!(header, ",cost_{k}");
    }
    for k in 1..=k_n {
        let _ = write!(header, ",q_{k}");
    }
    header.push_str(",cum_reward");
    for k in 1..=k_n {
        let _ = write!(header, ",cum_cost_{k}");
    }
    if traj.confidence.is_some() {
        header.push_str(",beta_sqrt,estimate_error");
    }
    header.push('\n');

    let mut out = header;
    let mut cum_reward = 0.0;
    let mut cum_costs = vec![0.0; k_n];
    for i in 0..traj.n_rounds() {
        cum_reward += traj.reward[i];
        let mut row = format!(
            "{},{},{},{}",
            i + 1,
            traj.context[i],
            traj.action[i],
            fmt17(traj.reward[i])
        );
        for k in 0..k_n {
            cum_costs[k] += traj.costs[i * k_n + k];
            let _ = write!(row, ",{}", fmt17(traj.costs[i * k_n + k]));
        }
        for k in 0..k_n {
            let _ = write!(row, ",{}", fmt17(traj.queues[i * k_n + k]));
        }
        let _ = write!(row, ",{}", fmt17(cum_reward));
        for c in &cum_costs {
            let _ = write!(row, ",{}", fmt17(*c));
        }
        if let Some((betas, errs)) = &traj.confidence {
            let _ = write!(row, ",{},{}", fmt17(betas[i]), fmt17(errs[i]));
        }
        row.push('\n');
        out.push_str(&row);
    }
    out
}

pub fn aggregate_csv(curves: &metrics::AggregateCurves) -> String {
    let mut header = String::from("tau,regret,regret_stderr,violation");
    for k in 1..=curves.pathwise_violation_freq.len() {
        let _ = write!(header, ",viol_freq_{k}");
    }
    header.push('\n');
    let mut out = header;
    for i in 0..curves.regret.len() {
        let mut row = format!(
            "{},{},{},{}",
            i + 1,
            fmt17(curves.regret[i]),
            fmt17(curves.regret_stderr[i]),
            fmt17(curves.violation[i])
        );
        for f in &curves.pathwise_violation_freq {
            let _ = write!(row, ",{}", fmt17(f[i]));
        }
        row.push('\n');
        out.push_str(&row);
    }
    out
}

fn summary_json(
    instance: &Instance,
    config: &ExperimentConfig,
    schedule: &Schedule,
    tau_prime: Option<usize>,
    opt: f64,
    curves: &metrics::AggregateCurves,
) -> String {
    let horizon = instance.horizon;
    let slope_lo = (horizon / 100)
        .max(100)
        .min(horizon.saturating_sub(1))
        .max(1);
    let positive: Vec<f64> = curves.regret.iter().map(|&r| r.max(0.0)).collect();
    let slope = if slope_lo < horizon {
        metrics::loglog_slope(&positive, (slope_lo, horizon)).ok()
    } else {
        None
    };
    let zero_from = metrics::zero_violation_from(&curves.violation);
    let final_idx = horizon - 1;
    let value = serde_json::json!({
        "instance": instance.label,
        "policy": config.policy.name(),
        "schedule": schedule.kind_name(),
        "horizon": horizon,
        "n_runs": curves.n_runs,
        "baseline_objective": opt,
        "delta": instance.delta,
        "final_regret": curves.regret[final_idx],
        "final_violation": curves.violation[final_idx],
        "regret_slope": slope.map(|s| serde_json::json!({
            "range": [slope_lo, horizon],
            "value": s,
        })),
        "tau_prime": tau_prime,
        "queue_over_sqrt_t": curves.queue_over_sqrt_t,
        "zero_violation_from": zero_from,
    });
    serde_json::to_string_pretty(&value).expect("summary serializes")
}

fn instance_from_arg(arg: &str, seed: u64, horizon: usize) -> Result<Instance, CliError> {
    match arg {
        "mab" => Ok(instances::mab_default(horizon)),
        "ward" => Ok(instances::ward_default(seed, horizon)),
        path => {
            let p = Path::new(path);
            if !p.exists() {
                return Err(CliError::Io(format!("no such instance file: {path}")));
            }
            instances::instance_from_file(p, Some(horizon))
                .map_err(|e| CliError::Validation(e.to_string()))
        }
    }
}

/// `baseline`: print objective, solution, per-constraint slack, and the
/// Slater margin; nonzero tightness solves the tightened program instead.
pub fn cmd_baseline(
    instance_arg: &str,
    eps: Option<f64>,
    instance_seed: u64,
) -> Result<String, CliError> {
    let instance = instance_from_arg(instance_arg, instance_seed, 1)?;
    let eps = eps.unwrap_or(0.0);
    if eps < 0.0 {
        return Err(CliError::Validation(format!("eps = {eps} must be >= 0")));
    }
    let delta_star =
        oracle::slater_margin(&instance).map_err(|e| CliError::Infeasible(e.to_string()))?;
    let sol = oracle::solve_tightened(&instance, eps);
    if sol.status == LpStatus::Infeasible {
        return Err(CliError::Infeasible(format!(
            "infeasible at eps = {eps} (Slater margin {delta_star})"
        )));
    }
    let mut out = String::new();
    let _ = writeln!(out, "status optimal");
    let _ = writeln!(out, "objective {}", sol.objective);
    let _ = writeln!(out, "delta_star {delta_star}");
    for (k, margin) in sol.active_margin.iter().enumerate() {
        let _ = writeln!(out, "margin_{} {margin}", k + 1);
    }
    let j_n = instance.n_actions();
    for c in 0..instance.n_contexts() {
        let row: Vec<String> = (0..j_n).map(|j| sol.x[c * j_n + j].to_string()).collect();
        let _ = writeln!(out, "x_{c} {}", row.join(" "));
    }
    Ok(out)
}

pub fn cmd_instance_validate(path: &Path) -> Result<String, CliError> {
    if !path.exists() {
        return Err(CliError::Io(format!("no such file: {}", path.display())));
    }
    let inst = instances::instance_from_file(path, None)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(format!(
        "ok: instance '{}' valid (contexts={}, J={}, K={}, d={}, T={}, delta={})\n",
        inst.label,
        inst.n_contexts(),
        inst.n_actions(),
        inst.n_constraints(),
        inst.d(),
        inst.horizon,
        inst.delta
    ))
}

/// Run the acceptance battery; returns the report and whether every
/// criterion passed.
pub fn cmd_verify(suite_name: &str) -> Result<(String, bool), CliError> {
    let suite = match suite_name {
        "quick" => Suite::Quick,
        "full" => Suite::Full,
        other => {
            return Err(CliError::Usage(format!(
                "unknown suite `{other}` (expected quick or full)"
            )))
        }
    };
    let results = verify::run_suite(suite);
    let mut out = String::new();
    let mut all_pass = true;
    for r in &results {
        all_pass &= r.pass;
        let _ = writeln!(
            out,
            "criterion {:2} {}  {} - {}",
            r.id,
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
    }
    let _ = writeln!(
        out,
        "{}: {}/{} criteria passed",
        if all_pass { "ok" } else { "FAILED" },
        results.iter().filter(|r| r.pass).count(),
        results.len()
    );
    Ok((out, all_pass))
}
