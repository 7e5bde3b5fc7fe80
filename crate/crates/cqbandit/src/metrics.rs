//! Regret and violation curves, pathwise tail frequencies, and queue
//! diagnostics over sets of trajectories.
//!
//! Pseudo-regret uses the recorded mean rewards rather than realized ones
//! to cut Monte Carlo variance (the noise is revealed after the action, so
//! both have the same expectation); realized-reward accounting is kept
//! behind a separate entry point for cross-checks. Violation applies the
//! positive part per constraint on the across-run mean, so violations of
//! different constraints cannot cancel.
//!
//! Curves are length-T vectors indexed by round: entry `i` is the value at
//! `tau = i + 1`. Aggregation folds runs in index order so results are
//! bit-reproducible.

use thiserror::Error;

use crate::algorithm::Trajectory;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("mismatched runs: {0}")]
    MismatchedRuns(String),
    #[error("no trajectories supplied")]
    Empty,
    #[error("curve has nonpositive values in the fit range (first at tau = {tau})")]
    NonpositiveValues { tau: usize },
    #[error("bad fit range [{lo}, {hi}] for a curve of length {len}")]
    BadRange { lo: usize, hi: usize, len: usize },
}

fn check_runs(trajectories: &[Trajectory]) -> Result<(usize, usize), MetricsError> {
    let first = trajectories.first().ok_or(MetricsError::Empty)?;
    for t in trajectories {
        if t.horizon != first.horizon
            || t.n_constraints != first.n_constraints
            || t.instance_label != first.instance_label
        {
            return Err(MetricsError::MismatchedRuns(format!(
                "run {} ({}, T={}, K={}) differs from run {} ({}, T={}, K={})",
                t.seed,
                t.instance_label,
                t.horizon,
                t.n_constraints,
                first.seed,
                first.instance_label,
                first.horizon,
                first.n_constraints
            )));
        }
        if t.n_rounds() != t.horizon {
            return Err(MetricsError::MismatchedRuns(format!(
                "run {} has {} rounds, expected {}",
                t.seed,
                t.n_rounds(),
                t.horizon
            )));
        }
    }
    Ok((first.horizon, first.n_constraints))
}

/// Pseudo-regret curve: `tau * opt - mean over runs of cumulative mean
/// reward`.
pub fn regret_curve(
    trajectories: &[Trajectory],
    opt_per_round: f64,
) -> Result<Vec<f64>, MetricsError> {
    Ok(regret_curve_with_stderr(trajectories, opt_per_round)?.0)
}

/// Pseudo-regret plus its across-run standard error.
pub fn regret_curve_with_stderr(
    trajectories: &[Trajectory],
    opt_per_round: f64,
) -> Result<(Vec<f64>, Vec<f64>), MetricsError> {
    curves_from_reward(trajectories, opt_per_round, |t| &t.mean_reward)
}

/// Regret computed from realized rewards; noisier, used for cross-checks
/// and behind the CLI's realized-regret flag.
pub fn regret_curve_realized(
    trajectories: &[Trajectory],
    opt_per_round: f64,
) -> Result<(Vec<f64>, Vec<f64>), MetricsError> {
    curves_from_reward(trajectories, opt_per_round, |t| &t.reward)
}

fn curves_from_reward<'a>(
    trajectories: &'a [Trajectory],
    opt_per_round: f64,
    column: impl Fn(&'a Trajectory) -> &'a [f64],
) -> Result<(Vec<f64>, Vec<f64>), MetricsError> {
    let (horizon, _) = check_runs(trajectories)?;
    let n = trajectories.len() as f64;
    let mut mean = vec![0.0; horizon];
    let mut m2 = vec![0.0; horizon];
    // cumulative per run, folded in run order (Welford across runs)
    for (idx, traj) in trajectories.iter().enumerate() {
        let mut cum = 0.0;
        let rewards = column(traj);
        let count = (idx + 1) as f64;
        for (i, &r) in rewards.iter().enumerate() {
            cum += r;
            let delta = cum - mean[i];
            mean[i] += delta / count;
            m2[i] += delta * (cum - mean[i]);
        }
    }
    let mut regret = Vec::with_capacity(horizon);
    let mut stderr = Vec::with_capacity(horizon);
    for i in 0..horizon {
        regret.push(opt_per_round * (i + 1) as f64 - mean[i]);
        let var = if n > 1.0 { m2[i] / (n - 1.0) } else { 0.0 };
        stderr.push((var / n).sqrt());
    }
    Ok((regret, stderr))
}

/// Violation curve: per-constraint positive part of the across-run mean
/// cumulative realized cost, summed over constraints.
pub fn violation_curve(trajectories: &[Trajectory]) -> Result<Vec<f64>, MetricsError> {
    let (horizon, k_n) = check_runs(trajectories)?;
    let n = trajectories.len() as f64;
    let mut mean_cum = vec![0.0; horizon * k_n];
    for traj in trajectories {
        let mut cum = vec![0.0; k_n];
        for i in 0..horizon {
            for k in 0..k_n {
                cum[k] += traj.costs[i * k_n + k];
                mean_cum[i * k_n + k] += cum[k];
            }
        }
    }
    Ok((0..horizon)
        .map(|i| (0..k_n).map(|k| (mean_cum[i * k_n + k] / n).max(0.0)).sum())
        .collect())
}

/// Fraction of runs whose cumulative realized cost of constraint `k` is
/// strictly positive at each round.
pub fn pathwise_violation_freq(
    trajectories: &[Trajectory],
    k: usize,
) -> Result<Vec<f64>, MetricsError> {
    let (horizon, k_n) = check_runs(trajectories)?;
    assert!(k < k_n, "constraint index {k} out of range");
    let n = trajectories.len() as f64;
    let mut freq = vec![0.0; horizon];
    for traj in trajectories {
        let mut cum = 0.0;
        for (i, f) in freq.iter_mut().enumerate() {
            cum += traj.costs[i * k_n + k];
            if cum > 0.0 {
                *f += 1.0;
            }
        }
    }
    for f in &mut freq {
        *f /= n;
    }
    Ok(freq)
}

/// Per-constraint `max over runs and rounds t >= t_min of Q_k(t)/sqrt(t)`.
pub fn queue_stats(trajectories: &[Trajectory], t_min: usize) -> Result<Vec<f64>, MetricsError> {
    let (horizon, k_n) = check_runs(trajectories)?;
    let mut stat = vec![0.0f64; k_n];
    for traj in trajectories {
        for t in t_min.max(1)..=horizon {
            let scale = (t as f64).sqrt();
            for (k, s) in stat.iter_mut().enumerate() {
                *s = s.max(traj.queue(t, k) / scale);
            }
        }
    }
    Ok(stat)
}

/// Least-squares slope of `log(curve[tau])` against `log(tau)` over all
/// rounds in the inclusive range.
pub fn loglog_slope(curve: &[f64], range: (usize, usize)) -> Result<f64, MetricsError> {
    let (lo, hi) = range;
    if lo < 1 || hi > curve.len() || lo >= hi {
        return Err(MetricsError::BadRange {
            lo,
            hi,
            len: curve.len(),
        });
    }
    let mut n = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for tau in lo..=hi {
        let y = curve[tau - 1];
        if y <= 0.0 {
            return Err(MetricsError::NonpositiveValues { tau });
        }
        let lx = (tau as f64).ln();
        let ly = y.ln();
        n += 1.0;
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    Ok((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

/// Everything the experiment harness reports about a set of runs.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCurves {
    pub n_runs: usize,
    /// Pseudo-regret per round (mean-reward accounting unless
    /// `realized_rewards` was requested).
    pub regret: Vec<f64>,
    pub regret_stderr: Vec<f64>,
    pub violation: Vec<f64>,
    /// Per-constraint pathwise violation frequency curves.
    pub pathwise_violation_freq: Vec<Vec<f64>>,
    /// Per-constraint max of Q_k(t)/sqrt(t) over runs and t >= t_min;
    /// `None` when no valid t_min was supplied (e.g. tau' beyond T).
    pub queue_over_sqrt_t: Option<Vec<f64>>,
}

impl AggregateCurves {
    pub fn compute(
        trajectories: &[Trajectory],
        opt_per_round: f64,
        queue_t_min: Option<usize>,
        realized_rewards: bool,
    ) -> Result<Self, MetricsError> {
        let (_, k_n) = check_runs(trajectories)?;
        let (regret, regret_stderr) = if realized_rewards {
            regret_curve_realized(trajectories, opt_per_round)?
        } else {
            regret_curve_with_stderr(trajectories, opt_per_round)?
        };
        let violation = violation_curve(trajectories)?;
        let mut pathwise = Vec::with_capacity(k_n);
        for k in 0..k_n {
            pathwise.push(pathwise_violation_freq(trajectories, k)?);
        }
        let queue_over_sqrt_t = match queue_t_min {
            Some(t_min) if t_min <= trajectories[0].horizon => {
                Some(queue_stats(trajectories, t_min)?)
            }
            _ => None,
        };
        Ok(AggregateCurves {
            n_runs: trajectories.len(),
            regret,
            regret_stderr,
            violation,
            pathwise_violation_freq: pathwise,
            queue_over_sqrt_t,
        })
    }
}

/// Smallest round from which the violation curve stays exactly zero
/// through the horizon; `None` if it is positive at the end.
pub fn zero_violation_from(violation: &[f64]) -> Option<usize> {
    let last_positive = violation.iter().rposition(|&v| v > 0.0);
    match last_positive {
        None => Some(1),
        Some(i) if i + 1 < violation.len() => Some(i + 2),
        Some(_) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithm::{run, PolicyKind, Trajectory};
    use crate::dual::Schedule;
    use crate::instances::mab_default;

    /// Hand-built trajectory with constant per-round mean reward and
    /// per-constraint costs.
    fn fake(seed: u64, horizon: usize, mean_reward: f64, costs: &[f64]) -> Trajectory {
        let k = costs.len();
        let mut queues = vec![0.0; k];
        let mut all_queues = Vec::new();
        for _ in 0..horizon {
            for (q, &w) in queues.iter_mut().zip(costs) {
                *q = (*q + w).max(0.0);
            }
            all_queues.extend_from_slice(&queues);
        }
        Trajectory {
            seed,
            policy: PolicyKind::Uniform,
            schedule: Schedule::Custom {
                v_coef: 1.0,
                eps_coef: 0.0,
            },
            instance_label: "fake".into(),
            horizon,
            n_constraints: k,
            context: vec![0; horizon],
            action: vec![0; horizon],
            reward: vec![mean_reward; horizon],
            mean_reward: vec![mean_reward; horizon],
            costs: costs.repeat(horizon),
            mean_costs: costs.repeat(horizon),
            dual_costs: costs.repeat(horizon),
            queues: all_queues,
            confidence: None,
        }
    }

    #[test]
    fn single_run_regret_is_definitional() {
        let t = fake(0, 1, 0.4, &[0.0]);
        let r = regret_curve(&[t], 0.7).unwrap();
        assert!((r[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn violation_examples() {
        let all_neg = fake(0, 10, 0.5, &[-1.0]);
        assert!(violation_curve(&[all_neg])
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let pos = fake(0, 10, 0.5, &[0.5]);
        let v = violation_curve(&[pos]).unwrap();
        for (i, &vi) in v.iter().enumerate() {
            assert!((vi - 0.5 * (i + 1) as f64).abs() < 1e-12);
        }
        // per-constraint positive part: no cancellation across k
        let two = fake(0, 10, 0.5, &[0.3, -0.5]);
        let v = violation_curve(&[two]).unwrap();
        assert!((v[9] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn pathwise_freq_examples() {
        let neg = fake(0, 5, 0.5, &[-1.0]);
        let pos = fake(1, 5, 0.5, &[1.0]);
        assert!(pathwise_violation_freq(&[neg.clone()], 0)
            .unwrap()
            .iter()
            .all(|&f| f == 0.0));
        assert!(pathwise_violation_freq(&[pos.clone()], 0)
            .unwrap()
            .iter()
            .all(|&f| f == 1.0));
        let mixed = pathwise_violation_freq(&[neg, pos], 0).unwrap();
        assert!(mixed.iter().all(|&f| (f - 0.5).abs() < 1e-15));
    }

    #[test]
    fn queue_stats_examples() {
        let neg = fake(0, 100, 0.5, &[-1.0]);
        assert_eq!(queue_stats(&[neg], 10).unwrap(), vec![0.0]);
        // fabricate Q(t) = sqrt(t)
        let mut sq = fake(0, 100, 0.5, &[0.0]);
        for t in 1..=100 {
            sq.queues[t - 1] = (t as f64).sqrt();
        }
        let stat = queue_stats(&[sq], 1).unwrap();
        assert!((stat[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loglog_slope_examples() {
        let curve: Vec<f64> = (1..=100_000).map(|t| (t as f64).sqrt()).collect();
        let s = loglog_slope(&curve, (1000, 100_000)).unwrap();
        assert!((s - 0.5).abs() < 1e-9);
        let lin: Vec<f64> = (1..=10_000).map(|t| t as f64).collect();
        assert!((loglog_slope(&lin, (10, 10_000)).unwrap() - 1.0).abs() < 1e-9);
        let poly: Vec<f64> = (1..=100_000)
            .map(|t| 3.0 * (t as f64).sqrt() * (t as f64).ln())
            .collect();
        let s = loglog_slope(&poly, (1000, 100_000)).unwrap();
        assert!(s > 0.5 && s < 0.62, "slope {s}");
        let with_zero = vec![0.0; 100];
        assert!(matches!(
            loglog_slope(&with_zero, (1, 100)),
            Err(MetricsError::NonpositiveValues { .. })
        ));
        assert!(matches!(
            loglog_slope(&lin, (0, 10)),
            Err(MetricsError::BadRange { .. })
        ));
    }

    #[test]
    fn zero_violation_from_examples() {
        assert_eq!(zero_violation_from(&[0.0, 0.0, 0.0]), Some(1));
        assert_eq!(zero_violation_from(&[1.0, 0.5, 0.0, 0.0]), Some(3));
        assert_eq!(zero_violation_from(&[0.0, 0.0, 0.2]), None);
    }

    #[test]
    fn mismatched_runs_rejected() {
        let a = fake(0, 10, 0.5, &[0.0]);
        let b = fake(1, 20, 0.5, &[0.0]);
        assert!(matches!(
            regret_curve(&[a, b], 0.7),
            Err(MetricsError::MismatchedRuns(_))
        ));
        assert!(matches!(regret_curve(&[], 0.7), Err(MetricsError::Empty)));
    }

    #[test]
    fn aggregates_match_naive_fold() {
        // recomputability: streaming aggregation equals a from-scratch fold
        let inst = mab_default(200);
        let runs: Vec<Trajectory> = (0..5)
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
        let (regret, _) = regret_curve_with_stderr(&runs, 0.7).unwrap();
        let viol = violation_curve(&runs).unwrap();
        for tau in [1usize, 7, 50, 200] {
            let mut sum_rewards = 0.0;
            let mut sum_cost = 0.0;
            for r in &runs {
                sum_rewards += r.mean_reward[..tau].iter().sum::<f64>();
                for t in 1..=tau {
                    sum_cost += r.cost(t, 0);
                }
            }
            let naive_regret = 0.7 * tau as f64 - sum_rewards / runs.len() as f64;
            assert!((naive_regret - regret[tau - 1]).abs() < 1e-9);
            let naive_viol = (sum_cost / runs.len() as f64).max(0.0);
            assert!((naive_viol - viol[tau - 1]).abs() < 1e-9);
        }
    }

    #[test]
    fn mean_and_realized_accounting_agree() {
        let inst = mab_default(2_000);
        let runs: Vec<Trajectory> = (0..20)
            .map(|s| {
                run(
                    &inst,
                    PolicyKind::PessimisticOptimistic,
                    Schedule::ExperimentMab,
                    100 + s,
                )
                .unwrap()
            })
            .collect();
        let (mean_based, _) = regret_curve_with_stderr(&runs, 0.7).unwrap();
        let (realized, stderr) = regret_curve_realized(&runs, 0.7).unwrap();
        let last = inst.horizon - 1;
        assert!(
            (mean_based[last] - realized[last]).abs() <= 4.0 * stderr[last].max(1e-9),
            "mean {} realized {} stderr {}",
            mean_based[last],
            realized[last],
            stderr[last]
        );
    }
}
