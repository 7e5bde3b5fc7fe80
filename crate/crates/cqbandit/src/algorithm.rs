//! The pessimistic-optimistic main loop, its linear-cost variant, and
//! comparator policies.
//!
//! Each round: compute the schedule pair `(V_t, eps_t)`, score every
//! action by `r_hat(c, j) - (1/V_t) sum_k W_k(c, j) Q_k`, act on the
//! argmax (lowest index on ties), feed the realized reward back into the
//! ridge state, and push the chosen action's costs plus `eps_t` into the
//! virtual queues. In the main setting the scored costs are the observed
//! pre-action realizations; in the linear-cost variant they are clipped
//! pessimistic estimates, the realized cost is only revealed after acting,
//! and the dual update consumes the estimate rather than the realization.

use thiserror::Error;

use crate::confidence::{
    self, optimistic_reward, pessimistic_cost, radius, ridge_init, RidgeState,
};
use crate::dual::{dual_update, QueueVector, Schedule};
use crate::instances::{
    realize_linear_costs, realize_reward, sample_round, CostModel, Instance, Observation,
};
use crate::oracle::{self, LpStatus};
use crate::rng::{categorical, RunRng, StreamPurpose};

#[derive(Debug, Error)]
pub enum AlgorithmError {
    #[error(transparent)]
    Confidence(#[from] confidence::ConfidenceError),
    #[error("observation is missing the pre-action cost matrix")]
    MissingCostMatrix,
    #[error("baseline LP infeasible; oracle-lp policy undefined")]
    LpInfeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    PessimisticOptimistic,
    LinUcbUnconstrained,
    OracleLp,
    Uniform,
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::PessimisticOptimistic => "pessimistic-optimistic",
            PolicyKind::LinUcbUnconstrained => "linucb-unconstrained",
            PolicyKind::OracleLp => "oracle-lp",
            PolicyKind::Uniform => "uniform",
        }
    }
}

/// Mutable per-run policy state.
#[derive(Debug, Clone)]
pub struct AlgState {
    pub ridge_reward: RidgeState,
    /// One cost ellipsoid per constraint; populated only for linear costs.
    pub ridge_cost: Vec<RidgeState>,
    pub queues: QueueVector,
    pub schedule: Schedule,
    /// Completed rounds.
    pub t: usize,
    /// Reward-parameter norm bound used in the radius.
    pub m: f64,
    /// Confidence tail probability (1/T unless overridden).
    pub p: f64,
    /// Zero for the unconstrained comparator, one otherwise.
    use_multiplier: bool,
}

impl AlgState {
    pub fn new(instance: &Instance, schedule: Schedule, p: f64) -> Self {
        let ridge_cost = match &instance.cost {
            CostModel::Linear(models) => models.iter().map(|m| ridge_init(m.psi.d())).collect(),
            CostModel::Tabular(_) => Vec::new(),
        };
        AlgState {
            ridge_reward: ridge_init(instance.d()),
            ridge_cost,
            queues: QueueVector::zeros(instance.n_constraints()),
            schedule,
            t: 0,
            m: instance.reward.m,
            p,
            use_multiplier: true,
        }
    }

    fn unconstrained(mut self) -> Self {
        self.use_multiplier = false;
        self
    }
}

/// One completed round, as recorded in a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundData {
    pub t: usize,
    pub context: usize,
    pub action: usize,
    pub reward: f64,
    pub mean_reward: f64,
    /// Realized costs of the chosen action.
    pub costs: Vec<f64>,
    pub mean_costs: Vec<f64>,
    /// What the dual update consumed: realized costs in the main setting,
    /// pessimistic estimates in the linear-cost variant.
    pub dual_costs: Vec<f64>,
    /// Queues after the update.
    pub queues: Vec<f64>,
    pub confidence: Option<(f64, f64)>, // (beta_sqrt, ||theta_hat - theta_star||_Sigma)
}

/// Column-major record of a full run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub policy: PolicyKind,
    pub schedule: Schedule,
    pub instance_label: String,
    pub horizon: usize,
    pub n_constraints: usize,
    pub context: Vec<u32>,
    pub action: Vec<u32>,
    pub reward: Vec<f64>,
    pub mean_reward: Vec<f64>,
    /// Flat `t * K + k`.
    pub costs: Vec<f64>,
    pub mean_costs: Vec<f64>,
    pub dual_costs: Vec<f64>,
    pub queues: Vec<f64>,
    /// `(beta_sqrt, estimate error)` per round when tracing is on.
    pub confidence: Option<(Vec<f64>, Vec<f64>)>,
}

impl Trajectory {
    fn new(
        seed: u64,
        policy: PolicyKind,
        schedule: Schedule,
        instance: &Instance,
        trace: bool,
    ) -> Self {
        let t = instance.horizon;
        let k = instance.n_constraints();
        Trajectory {
            seed,
            policy,
            schedule,
            instance_label: instance.label.clone(),
            horizon: t,
            n_constraints: k,
            context: Vec::with_capacity(t),
            action: Vec::with_capacity(t),
            reward: Vec::with_capacity(t),
            mean_reward: Vec::with_capacity(t),
            costs: Vec::with_capacity(t * k),
            mean_costs: Vec::with_capacity(t * k),
            dual_costs: Vec::with_capacity(t * k),
            queues: Vec::with_capacity(t * k),
            confidence: trace.then(|| (Vec::with_capacity(t), Vec::with_capacity(t))),
        }
    }

    fn push(&mut self, round: RoundData) {
        debug_assert_eq!(round.t, self.context.len() + 1);
        self.context.push(round.context as u32);
        self.action.push(round.action as u32);
        self.reward.push(round.reward);
        self.mean_reward.push(round.mean_reward);
        self.costs.extend_from_slice(&round.costs);
        self.mean_costs.extend_from_slice(&round.mean_costs);
        self.dual_costs.extend_from_slice(&round.dual_costs);
        self.queues.extend_from_slice(&round.queues);
        if let Some((betas, errs)) = &mut self.confidence {
            let (b, e) = round.confidence.unwrap_or((f64::NAN, f64::NAN));
            betas.push(b);
            errs.push(e);
        }
    }

    pub fn n_rounds(&self) -> usize {
        self.context.len()
    }

    /// Realized cost of constraint `k` in round `t` (1-based).
    pub fn cost(&self, t: usize, k: usize) -> f64 {
        self.costs[(t - 1) * self.n_constraints + k]
    }

    pub fn queue(&self, t: usize, k: usize) -> f64 {
        self.queues[(t - 1) * self.n_constraints + k]
    }
}

/// Pseudo-action-values `r_hat[j] - (1/v) sum_k cost_est[k][j] q[k]`.
pub fn pseudo_values(r_hat: &[f64], cost_est: &[f64], q: &QueueVector, v: f64) -> Vec<f64> {
    debug_assert!(v > 0.0);
    let j_n = r_hat.len();
    debug_assert_eq!(cost_est.len(), j_n * q.len());
    let mut values = r_hat.to_vec();
    for (k, &qk) in q.values().iter().enumerate() {
        if qk == 0.0 {
            continue;
        }
        for (j, value) in values.iter_mut().enumerate() {
            *value -= qk / v * cost_est[k * j_n + j];
        }
    }
    values
}

/// Argmax with ties broken toward the smallest index.
pub fn select_action(values: &[f64]) -> usize {
    debug_assert!(!values.is_empty());
    let mut best = 0;
    for (j, &v) in values.iter().enumerate().skip(1) {
        debug_assert!(!v.is_nan());
        if v > values[best] {
            best = j;
        }
    }
    best
}

/// One round of the main (pre-observed tabular costs) policy.
pub fn step(
    state: &mut AlgState,
    obs: &Observation,
    instance: &Instance,
    rng: &RunRng,
    trace: bool,
) -> Result<RoundData, AlgorithmError> {
    let t = state.t + 1;
    debug_assert_eq!(obs.t, t);
    let c = obs.context;
    let j_n = instance.n_actions();
    let k_n = instance.n_constraints();
    let v = state.schedule.v(t);
    let eps = state.schedule.eps(t);

    let rad = radius(
        state.ridge_reward.n_updates(),
        instance.d(),
        state.m,
        state.p,
    );
    let trace_data = trace.then(|| {
        (
            rad.beta_sqrt,
            confidence::estimate_error(&state.ridge_reward, &instance.reward.theta_star),
        )
    });
    let r_hat: Vec<f64> = (0..j_n)
        .map(|j| optimistic_reward(&state.ridge_reward, &rad, instance.features.get(c, j)))
        .collect();

    let costs = obs
        .cost_matrix
        .as_ref()
        .ok_or(AlgorithmError::MissingCostMatrix)?;
    let values = if state.use_multiplier {
        pseudo_values(&r_hat, costs, &state.queues, v)
    } else {
        r_hat
    };
    let action = select_action(&values);

    let reward = realize_reward(instance, rng, t, c, action);
    state
        .ridge_reward
        .rank_one_update(instance.features.get(c, action), reward)?;

    let chosen: Vec<f64> = (0..k_n).map(|k| costs[k * j_n + action]).collect();
    state.queues = dual_update(&state.queues, &chosen, eps);
    state.t = t;

    Ok(RoundData {
        t,
        context: c,
        action,
        reward,
        mean_reward: instance.mean_reward(c, action),
        mean_costs: (0..k_n).map(|k| instance.mean_cost(c, action, k)).collect(),
        dual_costs: chosen.clone(),
        costs: chosen,
        queues: state.queues.values().to_vec(),
        confidence: trace_data,
    })
}

/// One round of the linear-cost variant: costs are scored and queued via
/// clipped pessimistic estimates, and the realized cost of the chosen
/// action is observed only afterwards.
pub fn step_linear_cost(
    state: &mut AlgState,
    obs: &Observation,
    instance: &Instance,
    rng: &RunRng,
    trace: bool,
) -> Result<RoundData, AlgorithmError> {
    let t = state.t + 1;
    debug_assert_eq!(obs.t, t);
    let c = obs.context;
    let j_n = instance.n_actions();
    let k_n = instance.n_constraints();
    let CostModel::Linear(cost_models) = &instance.cost else {
        return Err(AlgorithmError::MissingCostMatrix);
    };
    let v = state.schedule.v(t);
    let eps = state.schedule.eps(t);

    let rad = radius(
        state.ridge_reward.n_updates(),
        instance.d(),
        state.m,
        state.p,
    );
    let trace_data = trace.then(|| {
        (
            rad.beta_sqrt,
            confidence::estimate_error(&state.ridge_reward, &instance.reward.theta_star),
        )
    });
    let r_hat: Vec<f64> = (0..j_n)
        .map(|j| optimistic_reward(&state.ridge_reward, &rad, instance.features.get(c, j)))
        .collect();

    // The cost parameter is norm-bounded by one, so its radius uses m = 1.
    let mut w_check = vec![0.0; k_n * j_n];
    for (k, model) in cost_models.iter().enumerate() {
        let rad_k = radius(state.ridge_cost[k].n_updates(), model.psi.d(), 1.0, state.p);
        for j in 0..j_n {
            w_check[k * j_n + j] =
                pessimistic_cost(&state.ridge_cost[k], &rad_k, model.psi.get(c, j));
        }
    }

    let values = if state.use_multiplier {
        pseudo_values(&r_hat, &w_check, &state.queues, v)
    } else {
        r_hat
    };
    let action = select_action(&values);

    let reward = realize_reward(instance, rng, t, c, action);
    state
        .ridge_reward
        .rank_one_update(instance.features.get(c, action), reward)?;

    let realized = realize_linear_costs(instance, rng, t, c, action);
    for (k, model) in cost_models.iter().enumerate() {
        state.ridge_cost[k].rank_one_update(model.psi.get(c, action), realized[k])?;
    }

    let estimates: Vec<f64> = (0..k_n).map(|k| w_check[k * j_n + action]).collect();
    state.queues = dual_update(&state.queues, &estimates, eps);
    state.t = t;

    Ok(RoundData {
        t,
        context: c,
        action,
        reward,
        mean_reward: instance.mean_reward(c, action),
        costs: realized,
        mean_costs: (0..k_n).map(|k| instance.mean_cost(c, action, k)).collect(),
        dual_costs: estimates,
        queues: state.queues.values().to_vec(),
        confidence: trace_data,
    })
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub trace_confidence: bool,
    /// Confidence tail probability; defaults to 1/T.
    pub confidence_p: Option<f64>,
}

pub fn run(
    instance: &Instance,
    policy: PolicyKind,
    schedule: Schedule,
    seed: u64,
) -> Result<Trajectory, AlgorithmError> {
    run_with_options(instance, policy, schedule, seed, &RunOptions::default())
}

/// Execute all `T` rounds of one replication.
pub fn run_with_options(
    instance: &Instance,
    policy: PolicyKind,
    schedule: Schedule,
    seed: u64,
    opts: &RunOptions,
) -> Result<Trajectory, AlgorithmError> {
    let rng = RunRng::new(seed);
    let horizon = instance.horizon;
    // default p = 1/T; T = 1 would give p = 1, so stay strictly inside (0, 1)
    let p = opts
        .confidence_p
        .unwrap_or(1.0 / horizon as f64)
        .clamp(f64::MIN_POSITIVE, 1.0 - 1e-12);
    let linear = instance.cost.is_linear();
    let mut traj = Trajectory::new(
        seed,
        policy,
        schedule.clone(),
        instance,
        opts.trace_confidence,
    );

    match policy {
        PolicyKind::PessimisticOptimistic | PolicyKind::LinUcbUnconstrained => {
            let mut state = AlgState::new(instance, schedule, p);
            if policy == PolicyKind::LinUcbUnconstrained {
                state = state.unconstrained();
            }
            for t in 1..=horizon {
                let obs = sample_round(instance, &rng, t);
                let round = if linear {
                    step_linear_cost(&mut state, &obs, instance, &rng, opts.trace_confidence)?
                } else {
                    step(&mut state, &obs, instance, &rng, opts.trace_confidence)?
                };
                traj.push(round);
            }
        }
        PolicyKind::OracleLp | PolicyKind::Uniform => {
            let lp = (policy == PolicyKind::OracleLp).then(|| oracle::solve_baseline(instance));
            if let Some(sol) = &lp {
                if sol.status == LpStatus::Infeasible {
                    return Err(AlgorithmError::LpInfeasible);
                }
            }
            let j_n = instance.n_actions();
            let k_n = instance.n_constraints();
            let mut queues = QueueVector::zeros(k_n);
            for t in 1..=horizon {
                let obs = sample_round(instance, &rng, t);
                let c = obs.context;
                let mut policy_rng = rng.stream(t as u64, StreamPurpose::Policy);
                let action = match &lp {
                    Some(sol) => categorical(&mut policy_rng, &sol.x[c * j_n..(c + 1) * j_n]),
                    None => rand::Rng::gen_range(&mut policy_rng, 0..j_n),
                };
                let reward = realize_reward(instance, &rng, t, c, action);
                let costs: Vec<f64> = match &obs.cost_matrix {
                    Some(m) => (0..k_n).map(|k| m[k * j_n + action]).collect(),
                    None => realize_linear_costs(instance, &rng, t, c, action),
                };
                queues = dual_update(&queues, &costs, traj.schedule.eps(t));
                traj.push(RoundData {
                    t,
                    context: c,
                    action,
                    reward,
                    mean_reward: instance.mean_reward(c, action),
                    mean_costs: (0..k_n).map(|k| instance.mean_cost(c, action, k)).collect(),
                    dual_costs: costs.clone(),
                    costs,
                    queues: queues.values().to_vec(),
                    confidence: None,
                });
            }
        }
    }
    Ok(traj)
}
