//! Problem instances: contexts, features, reward and cost models, and
//! seeded sampling of rounds.
//!
//! An [`Instance`] is immutable after construction and validated
//! exhaustively there (feature norms, mean-reward range, cost support),
//! so sampling never fails. Sampling takes an explicit [`RunRng`] and a
//! round index; identical `(seed, round)` pairs yield identical draws.
//!
//! # Instance files
//!
//! Instances can be loaded from a small sectioned key-value format:
//!
//! ```text
//! [meta]
//! K = 1
//! J = 4
//! d = 4
//! T = 10000
//! delta = auto              # or a number in (0, 1]
//!
//! [contexts]
//! p = 1.0                   # one probability per context
//!
//! [features|onehot]         # or [features] with rows phi.<c>.<j> = x1 .. xd
//!
//! [reward]
//! theta_star = 0.1 0.2 0.4 0.7
//! m = auto                  # or a number >= ||theta_star||
//! noise = bernoulli-residual     # or: noise = gaussian 0.25
//!
//! [cost.1]
//! kind = tabular
//! dist.0.0 = bernoulli 0.0 -0.5  # success prob, shift
//! dist.0.1 = point 0.3           # deterministic value
//! ...
//! ```
//!
//! A linear cost section instead reads `kind = linear` with `mu_star`,
//! `noise = <sigma>`, and either `psi = onehot` or rows `psi.<c>.<j>`.
//! `delta = auto` resolves to the instance's Slater margin.

use std::path::Path;

use rand::Rng;
use thiserror::Error;

use crate::linalg;
use crate::rng::{bernoulli, categorical, standard_normal, RunRng, StreamPurpose};

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("invalid feature map: {0}")]
    InvalidFeatures(String),
    #[error("invalid reward model: {0}")]
    InvalidReward(String),
    #[error("invalid cost model: {0}")]
    InvalidCost(String),
    #[error("invalid context distribution: {0}")]
    InvalidContexts(String),
    #[error("invalid means: {0}")]
    InvalidMeans(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("instance file parse error: {0}")]
    Parse(String),
}

/// Dense table of feature vectors in R^d indexed by (context, action).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    d: usize,
    n_contexts: usize,
    n_actions: usize,
    phi: Vec<f64>, // [(c * n_actions + j) * d ..][..d]
}

impl FeatureMap {
    /// `entries` holds the full table, context-major then action-major.
    pub fn new(
        n_contexts: usize,
        n_actions: usize,
        d: usize,
        entries: Vec<f64>,
    ) -> Result<Self, InstanceError> {
        if n_contexts == 0 || n_actions == 0 || d == 0 {
            return Err(InstanceError::InvalidFeatures(
                "dimensions must be positive".into(),
            ));
        }
        if entries.len() != n_contexts * n_actions * d {
            return Err(InstanceError::InvalidFeatures(format!(
                "expected {} entries, got {}",
                n_contexts * n_actions * d,
                entries.len()
            )));
        }
        let map = FeatureMap {
            d,
            n_contexts,
            n_actions,
            phi: entries,
        };
        for c in 0..n_contexts {
            for j in 0..n_actions {
                let n = linalg::norm2(map.get(c, j));
                if !(n.is_finite() && n <= 1.0 + 1e-9) {
                    return Err(InstanceError::InvalidFeatures(format!(
                        "||phi({c},{j})|| = {n} exceeds 1"
                    )));
                }
            }
        }
        Ok(map)
    }

    /// Standard basis embedding phi(c, j) = e_j with d = number of actions.
    pub fn one_hot(n_contexts: usize, n_actions: usize) -> Self {
        let d = n_actions;
        let mut phi = vec![0.0; n_contexts * n_actions * d];
        for c in 0..n_contexts {
            for j in 0..n_actions {
                phi[(c * n_actions + j) * d + j] = 1.0;
            }
        }
        FeatureMap {
            d,
            n_contexts,
            n_actions,
            phi,
        }
    }

    pub fn get(&self, c: usize, j: usize) -> &[f64] {
        let base = (c * self.n_actions + j) * self.d;
        &self.phi[base..base + self.d]
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_contexts(&self) -> usize {
        self.n_contexts
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
}

/// Zero-mean 1-sub-Gaussian reward noise families.
#[derive(Debug, Clone, PartialEq)]
pub enum RewardNoise {
    /// Additive N(0, sigma^2) with sigma <= 1.
    Gaussian { sigma: f64 },
    /// The reward itself is Bernoulli(r(c,j)); the residual is zero-mean
    /// and bounded, hence sub-Gaussian.
    BernoulliResidual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    pub theta_star: Vec<f64>,
    pub m: f64,
    pub noise: RewardNoise,
}

impl RewardModel {
    pub fn new(theta_star: Vec<f64>, m: f64, noise: RewardNoise) -> Result<Self, InstanceError> {
        let norm = linalg::norm2(&theta_star);
        if !(m.is_finite() && m >= 0.0) {
            return Err(InstanceError::InvalidReward(format!(
                "bad norm bound m={m}"
            )));
        }
        if norm > m + 1e-9 {
            return Err(InstanceError::InvalidReward(format!(
                "||theta_star|| = {norm} exceeds m = {m}"
            )));
        }
        if let RewardNoise::Gaussian { sigma } = noise {
            if !(0.0..=1.0).contains(&sigma) {
                return Err(InstanceError::InvalidReward(format!(
                    "gaussian sigma {sigma} outside [0, 1]"
                )));
            }
        }
        Ok(RewardModel {
            theta_star,
            m,
            noise,
        })
    }
}

/// Per-(k, c, j) cost distributions supported in the tabular setting.
#[derive(Debug, Clone, PartialEq)]
pub enum TabularDist {
    /// Takes `1 + shift` with probability `p`, `shift` otherwise.
    ShiftedBernoulli {
        p: f64,
        shift: f64,
    },
    Deterministic {
        value: f64,
    },
}

impl TabularDist {
    pub fn mean(&self) -> f64 {
        match *self {
            TabularDist::ShiftedBernoulli { p, shift } => p + shift,
            TabularDist::Deterministic { value } => value,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            TabularDist::ShiftedBernoulli { p, shift } => {
                if bernoulli(rng, p) {
                    1.0 + shift
                } else {
                    shift
                }
            }
            TabularDist::Deterministic { value } => value,
        }
    }

    fn validate(&self) -> Result<(), InstanceError> {
        match *self {
            TabularDist::ShiftedBernoulli { p, shift } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(InstanceError::InvalidCost(format!(
                        "bernoulli probability {p} outside [0, 1]"
                    )));
                }
                if shift < -1.0 - 1e-12 || 1.0 + shift > 1.0 + 1e-12 {
                    return Err(InstanceError::InvalidCost(format!(
                        "shifted bernoulli support [{}, {}] outside [-1, 1]",
                        shift,
                        1.0 + shift
                    )));
                }
            }
            TabularDist::Deterministic { value } => {
                if !(-1.0..=1.0).contains(&value) {
                    return Err(InstanceError::InvalidCost(format!(
                        "deterministic cost {value} outside [-1, 1]"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularCost {
    n_constraints: usize,
    n_contexts: usize,
    n_actions: usize,
    dists: Vec<TabularDist>, // [(k * n_contexts + c) * n_actions + j]
}

impl TabularCost {
    pub fn new(
        n_constraints: usize,
        n_contexts: usize,
        n_actions: usize,
        dists: Vec<TabularDist>,
    ) -> Result<Self, InstanceError> {
        if dists.len() != n_constraints * n_contexts * n_actions {
            return Err(InstanceError::InvalidCost(format!(
                "expected {} distributions, got {}",
                n_constraints * n_contexts * n_actions,
                dists.len()
            )));
        }
        for d in &dists {
            d.validate()?;
        }
        Ok(TabularCost {
            n_constraints,
            n_contexts,
            n_actions,
            dists,
        })
    }

    pub fn dist(&self, k: usize, c: usize, j: usize) -> &TabularDist {
        &self.dists[(k * self.n_contexts + c) * self.n_actions + j]
    }
}

/// One linearly parameterized cost signal, revealed after the action.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCostModel {
    pub mu_star: Vec<f64>,
    pub psi: FeatureMap,
    /// Std of the additive cost noise; must stay within [0, 1] to remain
    /// 1-sub-Gaussian.
    pub noise_sigma: f64,
}

impl LinearCostModel {
    pub fn new(
        mu_star: Vec<f64>,
        psi: FeatureMap,
        noise_sigma: f64,
    ) -> Result<Self, InstanceError> {
        if mu_star.len() != psi.d() {
            return Err(InstanceError::InvalidCost(
                "mu_star dimension does not match psi".into(),
            ));
        }
        let norm = linalg::norm2(&mu_star);
        if norm > 1.0 + 1e-9 {
            return Err(InstanceError::InvalidCost(format!(
                "||mu_star|| = {norm} exceeds 1"
            )));
        }
        if !(0.0..=1.0).contains(&noise_sigma) {
            return Err(InstanceError::InvalidCost(format!(
                "cost noise sigma {noise_sigma} outside [0, 1]"
            )));
        }
        for c in 0..psi.n_contexts() {
            for j in 0..psi.n_actions() {
                let w = linalg::dot(&mu_star, psi.get(c, j));
                if !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&w) {
                    return Err(InstanceError::InvalidCost(format!(
                        "mean cost w({c},{j}) = {w} outside [-1, 1]"
                    )));
                }
            }
        }
        Ok(LinearCostModel {
            mu_star,
            psi,
            noise_sigma,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CostModel {
    Tabular(TabularCost),
    /// One model per constraint; costs observed only after acting.
    Linear(Vec<LinearCostModel>),
}

impl CostModel {
    pub fn n_constraints(&self) -> usize {
        match self {
            CostModel::Tabular(t) => t.n_constraints,
            CostModel::Linear(v) => v.len(),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, CostModel::Linear(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextDistribution {
    p: Vec<f64>,
}

impl ContextDistribution {
    pub fn new(p: Vec<f64>) -> Result<Self, InstanceError> {
        if p.is_empty() {
            return Err(InstanceError::InvalidContexts("empty".into()));
        }
        if p.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(InstanceError::InvalidContexts(
                "entries must be nonnegative".into(),
            ));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(InstanceError::InvalidContexts(format!(
                "probabilities sum to {sum}, not 1"
            )));
        }
        Ok(ContextDistribution { p })
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

/// A fully validated problem instance. Immutable and thread-shareable.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub label: String,
    pub contexts: ContextDistribution,
    pub features: FeatureMap,
    pub reward: RewardModel,
    pub cost: CostModel,
    /// Horizon T.
    pub horizon: usize,
    /// Slater constant fed to the policy schedules; in (0, 1].
    pub delta: f64,
}

impl Instance {
    pub fn new(
        label: impl Into<String>,
        contexts: ContextDistribution,
        features: FeatureMap,
        reward: RewardModel,
        cost: CostModel,
        horizon: usize,
        delta: f64,
    ) -> Result<Self, InstanceError> {
        let inst = Instance {
            label: label.into(),
            contexts,
            features,
            reward,
            cost,
            horizon,
            delta,
        };
        inst.validate()?;
        Ok(inst)
    }

    fn validate(&self) -> Result<(), InstanceError> {
        if self.horizon == 0 {
            return Err(InstanceError::InvalidConfig("horizon must be >= 1".into()));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(InstanceError::InvalidConfig(format!(
                "delta = {} outside (0, 1]",
                self.delta
            )));
        }
        if self.contexts.len() != self.features.n_contexts() {
            return Err(InstanceError::InvalidConfig(
                "context count mismatch between distribution and features".into(),
            ));
        }
        if self.reward.theta_star.len() != self.features.d() {
            return Err(InstanceError::InvalidConfig(
                "theta_star dimension does not match features".into(),
            ));
        }
        match &self.cost {
            CostModel::Tabular(t) => {
                if t.n_contexts != self.features.n_contexts()
                    || t.n_actions != self.features.n_actions()
                {
                    return Err(InstanceError::InvalidConfig(
                        "tabular cost table shape mismatch".into(),
                    ));
                }
            }
            CostModel::Linear(models) => {
                if models.is_empty() {
                    return Err(InstanceError::InvalidConfig("no cost constraints".into()));
                }
                for m in models {
                    if m.psi.n_contexts() != self.features.n_contexts()
                        || m.psi.n_actions() != self.features.n_actions()
                    {
                        return Err(InstanceError::InvalidConfig(
                            "cost feature map shape mismatch".into(),
                        ));
                    }
                }
            }
        }
        // exhaustive mean-reward range scan
        for c in 0..self.n_contexts() {
            for j in 0..self.n_actions() {
                let r = self.mean_reward(c, j);
                if !(-1e-9..=1.0 + 1e-9).contains(&r) {
                    return Err(InstanceError::InvalidMeans(format!(
                        "mean reward r({c},{j}) = {r} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn n_actions(&self) -> usize {
        self.features.n_actions()
    }

    pub fn n_constraints(&self) -> usize {
        self.cost.n_constraints()
    }

    pub fn d(&self) -> usize {
        self.features.d()
    }

    pub fn with_horizon(mut self, horizon: usize) -> Result<Self, InstanceError> {
        self.horizon = horizon;
        self.validate()?;
        Ok(self)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self, InstanceError> {
        self.delta = delta;
        self.validate()?;
        Ok(self)
    }

    pub fn mean_reward(&self, c: usize, j: usize) -> f64 {
        linalg::dot(&self.reward.theta_star, self.features.get(c, j))
    }

    pub fn mean_cost(&self, c: usize, j: usize, k: usize) -> f64 {
        match &self.cost {
            CostModel::Tabular(t) => t.dist(k, c, j).mean(),
            CostModel::Linear(models) => {
                let m = &models[k];
                linalg::dot(&m.mu_star, m.psi.get(c, j))
            }
        }
    }
}

/// What the environment reveals at the start of a round.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub t: usize,
    pub context: usize,
    /// K x J realized costs for the drawn context, flat `k * J + j`.
    /// Present in the tabular setting, where the cost matrix is available
    /// before the action; absent for linear costs.
    pub cost_matrix: Option<Vec<f64>>,
}

/// Draw round `t`'s observation. Identical `(seed, t)` pairs give
/// identical observations regardless of what else was sampled.
pub fn sample_round(instance: &Instance, rng: &RunRng, t: usize) -> Observation {
    let mut ctx_rng = rng.stream(t as u64, StreamPurpose::Context);
    let context = categorical(&mut ctx_rng, instance.contexts.probs());
    let cost_matrix = match &instance.cost {
        CostModel::Tabular(tab) => {
            let mut cost_rng = rng.stream(t as u64, StreamPurpose::Cost);
            let k_n = instance.n_constraints();
            let j_n = instance.n_actions();
            let mut m = Vec::with_capacity(k_n * j_n);
            for k in 0..k_n {
                for j in 0..j_n {
                    m.push(tab.dist(k, context, j).sample(&mut cost_rng));
                }
            }
            Some(m)
        }
        CostModel::Linear(_) => None,
    };
    Observation {
        t,
        context,
        cost_matrix,
    }
}

/// Realize the reward for taking action `j` on context `c` in round `t`.
///
/// The noise draw depends only on `(seed, t)`, so coupled policies on the
/// same seed see the same noise.
pub fn realize_reward(instance: &Instance, rng: &RunRng, t: usize, c: usize, j: usize) -> f64 {
    let r = instance.mean_reward(c, j);
    let mut noise_rng = rng.stream(t as u64, StreamPurpose::RewardNoise);
    match instance.reward.noise {
        RewardNoise::Gaussian { sigma } => r + sigma * standard_normal(&mut noise_rng),
        RewardNoise::BernoulliResidual => {
            if bernoulli(&mut noise_rng, r) {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Realize the post-action cost signals of a linear-cost instance.
/// Panics if called on a tabular instance.
pub fn realize_linear_costs(
    instance: &Instance,
    rng: &RunRng,
    t: usize,
    c: usize,
    j: usize,
) -> Vec<f64> {
    let CostModel::Linear(models) = &instance.cost else {
        panic!("realize_linear_costs called on a tabular instance");
    };
    let mut cost_rng = rng.stream(t as u64, StreamPurpose::Cost);
    models
        .iter()
        .map(|m| {
            linalg::dot(&m.mu_star, m.psi.get(c, j))
                + m.noise_sigma * standard_normal(&mut cost_rng)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Preset builders
// ---------------------------------------------------------------------------

/// Single-context multi-armed instance: Bernoulli rewards with means
/// `r_bar`, a single cost whose raw Bernoulli means `c_bar` are recentred
/// by `budget` so the constraint takes the cumulative `<= 0` form.
pub fn mab_instance(
    r_bar: &[f64],
    c_bar: &[f64],
    budget: f64,
    horizon: usize,
) -> Result<Instance, InstanceError> {
    if r_bar.len() != c_bar.len() || r_bar.is_empty() {
        return Err(InstanceError::InvalidMeans(
            "r_bar and c_bar must be nonempty and equal length".into(),
        ));
    }
    if r_bar.iter().any(|&r| !(0.0..=1.0).contains(&r)) {
        return Err(InstanceError::InvalidMeans(
            "r_bar entries outside [0, 1]".into(),
        ));
    }
    if !(0.0..=1.0).contains(&budget) {
        return Err(InstanceError::InvalidMeans(format!(
            "budget {budget} outside [0, 1]"
        )));
    }
    if c_bar
        .iter()
        .any(|&c| !(-1.0..=1.0).contains(&(c - budget)) || !(0.0..=1.0).contains(&c))
    {
        return Err(InstanceError::InvalidMeans(
            "c_bar - budget entries outside [-1, 1]".into(),
        ));
    }
    let j_n = r_bar.len();
    let features = FeatureMap::one_hot(1, j_n);
    let m = linalg::norm2(r_bar);
    let reward = RewardModel::new(r_bar.to_vec(), m, RewardNoise::BernoulliResidual)?;
    let dists: Vec<TabularDist> = c_bar
        .iter()
        .map(|&p| TabularDist::ShiftedBernoulli { p, shift: -budget })
        .collect();
    let cost = CostModel::Tabular(TabularCost::new(1, 1, j_n, dists)?);
    // With one context and one constraint, the max-margin LP reduces to
    // putting all mass on the cheapest arm.
    let margin = c_bar
        .iter()
        .map(|&c| budget - c)
        .fold(f64::NEG_INFINITY, f64::max)
        .min(1.0);
    if margin <= 0.0 {
        return Err(InstanceError::InvalidMeans(
            "no arm satisfies the budget strictly; Slater margin is zero".into(),
        ));
    }
    Instance::new(
        "mab",
        ContextDistribution::new(vec![1.0])?,
        features,
        reward,
        cost,
        horizon,
        margin,
    )
}

/// The 4-arm constrained MAB benchmark configuration.
pub fn mab_default(horizon: usize) -> Instance {
    mab_instance(&[0.1, 0.2, 0.4, 0.7], &[0.0, 0.4, 0.5, 0.2], 0.5, horizon)
        .expect("default mab instance is valid")
}

pub const WARD_CAPACITY: [f64; 6] = [0.2, 0.2, 0.175, 0.175, 0.175, 0.175];
pub const WARD_FAIRNESS: [f64; 6] = [0.175, 0.175, 0.15, 0.15, 0.125, 0.125];
pub const WARD_RESOURCE: [f64; 6] = [0.1875, 0.1875, 0.1875, 0.1875, 0.1875, 0.1875];

const WARD_CONTEXTS: usize = 4;
const WARD_FEATURE_DIM: usize = 5;

/// Synthetic ward-assignment instance with three per-ward budget vectors
/// (capacity, fairness, resource). Assigning a patient to ward `j`
/// consumes one unit, recentred against ward budgets as
/// `W_k(c, j) = 1 - J * v_k[j]`, so every constraint takes the
/// cumulative `<= 0` form. Contexts, features, and `theta_star` are
/// seeded-random stand-ins; rewards are Bernoulli.
pub fn ward_instance(
    capacity: &[f64],
    fairness: &[f64],
    resource: &[f64],
    seed: u64,
    horizon: usize,
) -> Result<Instance, InstanceError> {
    ward_instance_with_noise(
        capacity,
        fairness,
        resource,
        seed,
        horizon,
        RewardNoise::BernoulliResidual,
    )
}

/// As [`ward_instance`] with an explicit reward-noise family
/// (e.g. `Gaussian { sigma: 0.0 }` for a fully deterministic variant).
pub fn ward_instance_with_noise(
    capacity: &[f64],
    fairness: &[f64],
    resource: &[f64],
    seed: u64,
    horizon: usize,
    noise: RewardNoise,
) -> Result<Instance, InstanceError> {
    let j_n = capacity.len();
    if fairness.len() != j_n || resource.len() != j_n || j_n == 0 {
        return Err(InstanceError::InvalidConfig(
            "constraint vectors must share a positive length".into(),
        ));
    }
    let rng = RunRng::new(seed);
    let mut gen = rng.stream(0, StreamPurpose::InstanceGen);

    let raw: Vec<f64> = (0..WARD_CONTEXTS)
        .map(|_| gen.gen::<f64>() + 1e-3)
        .collect();
    let sum: f64 = raw.iter().sum();
    let p: Vec<f64> = raw.iter().map(|x| x / sum).collect();

    let theta_raw: Vec<f64> = (0..WARD_FEATURE_DIM).map(|_| gen.gen::<f64>()).collect();
    let scale = 0.9 / linalg::norm2(&theta_raw).max(1e-9);
    let theta_star: Vec<f64> = theta_raw.iter().map(|x| x * scale).collect();

    let mut entries = Vec::with_capacity(WARD_CONTEXTS * j_n * WARD_FEATURE_DIM);
    for _ in 0..WARD_CONTEXTS {
        for _ in 0..j_n {
            // rejection-sample until the induced mean reward is in [0, 1]
            let mut tries = 0;
            loop {
                let raw: Vec<f64> = (0..WARD_FEATURE_DIM).map(|_| gen.gen::<f64>()).collect();
                let norm = linalg::norm2(&raw);
                let v: Vec<f64> = raw.iter().map(|x| x / norm.max(1.0)).collect();
                let r = linalg::dot(&theta_star, &v);
                if (0.0..=1.0).contains(&r) {
                    entries.extend_from_slice(&v);
                    break;
                }
                tries += 1;
                if tries > 1000 {
                    return Err(InstanceError::InvalidConfig(
                        "feature rejection sampling failed".into(),
                    ));
                }
            }
        }
    }
    let features = FeatureMap::new(WARD_CONTEXTS, j_n, WARD_FEATURE_DIM, entries)?;
    let reward = RewardModel::new(theta_star, 0.9, noise)?;

    let mut dists = Vec::with_capacity(3 * WARD_CONTEXTS * j_n);
    for vec_k in [capacity, fairness, resource] {
        for _c in 0..WARD_CONTEXTS {
            for &v in vec_k {
                let value = 1.0 - j_n as f64 * v;
                if !(-1.0..=1.0).contains(&value) {
                    return Err(InstanceError::InvalidConfig(format!(
                        "recentred cost {value} outside [-1, 1]; budget entry {v}"
                    )));
                }
                dists.push(TabularDist::Deterministic { value });
            }
        }
    }
    let cost = CostModel::Tabular(TabularCost::new(3, WARD_CONTEXTS, j_n, dists)?);

    let provisional = Instance::new(
        "ward",
        ContextDistribution::new(p)?,
        features,
        reward,
        cost,
        horizon,
        1.0,
    )?;
    let margin = crate::oracle::slater_margin(&provisional)
        .map_err(|e| InstanceError::InvalidConfig(format!("ward margin: {e}")))?;
    if margin <= 1e-9 {
        return Err(InstanceError::InvalidConfig(
            "constraint vectors leave no Slater margin".into(),
        ));
    }
    provisional.with_delta(margin)
}

/// Ward instance with the published budget vectors.
pub fn ward_default(seed: u64, horizon: usize) -> Instance {
    ward_instance(
        &WARD_CAPACITY,
        &WARD_FAIRNESS,
        &WARD_RESOURCE,
        seed,
        horizon,
    )
    .expect("default ward instance is valid")
}

/// Single-context instance with one-hot features for both reward and a
/// single linear cost, used to exercise the post-action cost variant.
pub fn one_hot_linear_cost_instance(
    r_bar: &[f64],
    w_bar: &[f64],
    cost_noise_sigma: f64,
    horizon: usize,
) -> Result<Instance, InstanceError> {
    if r_bar.len() != w_bar.len() || r_bar.is_empty() {
        return Err(InstanceError::InvalidMeans(
            "r_bar and w_bar must be nonempty and equal length".into(),
        ));
    }
    let j_n = r_bar.len();
    let features = FeatureMap::one_hot(1, j_n);
    let m = linalg::norm2(r_bar);
    let reward = RewardModel::new(r_bar.to_vec(), m, RewardNoise::BernoulliResidual)?;
    let cost_model = LinearCostModel::new(
        w_bar.to_vec(),
        FeatureMap::one_hot(1, j_n),
        cost_noise_sigma,
    )?;
    let margin = w_bar
        .iter()
        .map(|&w| -w)
        .fold(f64::NEG_INFINITY, f64::max)
        .min(1.0);
    if margin <= 0.0 {
        return Err(InstanceError::InvalidMeans(
            "no action has strictly negative mean cost".into(),
        ));
    }
    Instance::new(
        "linear-onehot",
        ContextDistribution::new(vec![1.0])?,
        features,
        reward,
        CostModel::Linear(vec![cost_model]),
        horizon,
        margin,
    )
}

/// Knobs for seeded synthetic instances used across tests.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub n_contexts: usize,
    pub n_actions: usize,
    pub n_constraints: usize,
    /// `None` embeds each (context, action) pair as its own basis vector.
    pub feature_dim: Option<usize>,
    pub noise: RewardNoise,
    /// Deterministic tabular cost means are drawn uniformly from this range.
    pub cost_range: (f64, f64),
    /// Force action 0 to have strictly negative cost for every constraint
    /// so Slater's condition holds.
    pub ensure_safe_action: bool,
    pub horizon: usize,
}

pub fn synth_instance(spec: &SynthSpec, seed: u64) -> Result<Instance, InstanceError> {
    let rng = RunRng::new(seed);
    let mut gen = rng.stream(0, StreamPurpose::InstanceGen);
    let (c_n, j_n, k_n) = (spec.n_contexts, spec.n_actions, spec.n_constraints);

    let raw: Vec<f64> = (0..c_n).map(|_| gen.gen::<f64>() + 1e-3).collect();
    let sum: f64 = raw.iter().sum();
    let p: Vec<f64> = raw.iter().map(|x| x / sum).collect();

    let (features, theta_star) = match spec.feature_dim {
        None => {
            let d = c_n * j_n;
            let mut phi = vec![0.0; c_n * j_n * d];
            for idx in 0..c_n * j_n {
                phi[idx * d + idx] = 1.0;
            }
            let theta: Vec<f64> = (0..d).map(|_| gen.gen::<f64>()).collect();
            (FeatureMap::new(c_n, j_n, d, phi)?, theta)
        }
        Some(d) => {
            let theta_raw: Vec<f64> = (0..d).map(|_| gen.gen::<f64>()).collect();
            let scale = 0.9 / linalg::norm2(&theta_raw).max(1e-9);
            let theta: Vec<f64> = theta_raw.iter().map(|x| x * scale).collect();
            let mut entries = Vec::with_capacity(c_n * j_n * d);
            for _ in 0..c_n * j_n {
                let raw: Vec<f64> = (0..d).map(|_| gen.gen::<f64>()).collect();
                let norm = linalg::norm2(&raw);
                entries.extend(raw.iter().map(|x| x / norm.max(1.0)));
            }
            (FeatureMap::new(c_n, j_n, d, entries)?, theta)
        }
    };
    let m = linalg::norm2(&theta_star).max(1e-12);
    let reward = RewardModel::new(theta_star, m, spec.noise.clone())?;

    let (lo, hi) = spec.cost_range;
    let mut dists = Vec::with_capacity(k_n * c_n * j_n);
    for _k in 0..k_n {
        for _c in 0..c_n {
            for j in 0..j_n {
                let value = if j == 0 && spec.ensure_safe_action {
                    -0.9 + 0.8 * gen.gen::<f64>()
                } else {
                    lo + (hi - lo) * gen.gen::<f64>()
                };
                dists.push(TabularDist::Deterministic {
                    value: value.clamp(-1.0, 1.0),
                });
            }
        }
    }
    let cost = CostModel::Tabular(TabularCost::new(k_n, c_n, j_n, dists)?);

    let provisional = Instance::new(
        format!("synth-{seed}"),
        ContextDistribution::new(p)?,
        features,
        reward,
        cost,
        spec.horizon,
        0.5,
    )?;
    if spec.ensure_safe_action {
        let margin = crate::oracle::slater_margin(&provisional)
            .map_err(|e| InstanceError::InvalidConfig(format!("synth margin: {e}")))?;
        if margin > 1e-9 {
            return provisional.with_delta(margin.min(1.0));
        }
    }
    Ok(provisional)
}

// ---------------------------------------------------------------------------
// Instance file format
// ---------------------------------------------------------------------------

pub fn instance_from_file(
    path: &Path,
    horizon_override: Option<usize>,
) -> Result<Instance, InstanceError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| InstanceError::Parse(format!("{}: {e}", path.display())))?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into());
    let mut inst = instance_from_str(&text, &label)?;
    if let Some(t) = horizon_override {
        inst = inst.with_horizon(t)?;
    }
    Ok(inst)
}

struct Section {
    name: String,
    variant: Option<String>,
    entries: Vec<(String, String)>,
}

fn parse_sections(text: &str) -> Result<Vec<Section>, InstanceError> {
    let mut sections: Vec<Section> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let mut parts = inner.splitn(2, '|');
            let name = parts.next().unwrap().trim().to_string();
            let variant = parts.next().map(|v| v.trim().to_string());
            sections.push(Section {
                name,
                variant,
                entries: Vec::new(),
            });
        } else if let Some((k, v)) = line.split_once('=') {
            let section = sections.last_mut().ok_or_else(|| {
                InstanceError::Parse(format!("line {}: key outside any section", lineno + 1))
            })?;
            section
                .entries
                .push((k.trim().to_string(), v.trim().to_string()));
        } else {
            return Err(InstanceError::Parse(format!(
                "line {}: expected `key = value` or `[section]`",
                lineno + 1
            )));
        }
    }
    Ok(sections)
}

fn get_value<'a>(section: &'a Section, key: &str) -> Option<&'a str> {
    section
        .entries
        .iter()
        .rev()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
}

fn require<'a>(section: &'a Section, key: &str) -> Result<&'a str, InstanceError> {
    get_value(section, key)
        .ok_or_else(|| InstanceError::Parse(format!("[{}] missing key `{key}`", section.name)))
}

fn parse_f64(s: &str, what: &str) -> Result<f64, InstanceError> {
    s.parse::<f64>()
        .map_err(|_| InstanceError::Parse(format!("bad number `{s}` for {what}")))
}

fn parse_usize(s: &str, what: &str) -> Result<usize, InstanceError> {
    s.parse::<usize>()
        .map_err(|_| InstanceError::Parse(format!("bad integer `{s}` for {what}")))
}

fn parse_vector(s: &str, what: &str) -> Result<Vec<f64>, InstanceError> {
    s.split_whitespace()
        .map(|tok| parse_f64(tok, what))
        .collect()
}

pub fn instance_from_str(text: &str, label: &str) -> Result<Instance, InstanceError> {
    let sections = parse_sections(text)?;
    let find = |name: &str| sections.iter().find(|s| s.name == name);

    let meta = find("meta").ok_or_else(|| InstanceError::Parse("missing [meta]".into()))?;
    let k_n = parse_usize(require(meta, "K")?, "K")?;
    let j_n = parse_usize(require(meta, "J")?, "J")?;
    let d = parse_usize(require(meta, "d")?, "d")?;
    let horizon = parse_usize(require(meta, "T")?, "T")?;
    let delta_raw = require(meta, "delta")?.to_string();

    let ctx = find("contexts").ok_or_else(|| InstanceError::Parse("missing [contexts]".into()))?;
    let p = parse_vector(require(ctx, "p")?, "context probabilities")?;
    let c_n = p.len();
    let contexts = ContextDistribution::new(p)?;

    let feats =
        find("features").ok_or_else(|| InstanceError::Parse("missing [features]".into()))?;
    let features = parse_feature_section(feats, c_n, j_n, d, "phi")?;

    let reward_sec =
        find("reward").ok_or_else(|| InstanceError::Parse("missing [reward]".into()))?;
    let theta_star = parse_vector(require(reward_sec, "theta_star")?, "theta_star")?;
    if theta_star.len() != d {
        return Err(InstanceError::Parse(format!(
            "theta_star has {} entries, expected d = {d}",
            theta_star.len()
        )));
    }
    let m = match get_value(reward_sec, "m") {
        None => linalg::norm2(&theta_star),
        Some("auto") => linalg::norm2(&theta_star),
        Some(v) => parse_f64(v, "m")?,
    };
    let noise = parse_reward_noise(require(reward_sec, "noise")?)?;
    let reward = RewardModel::new(theta_star, m, noise)?;

    let mut cost_secs = Vec::new();
    for k in 1..=k_n {
        let name = format!("cost.{k}");
        let sec = sections
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| InstanceError::Parse(format!("missing [{name}]")))?;
        cost_secs.push(sec);
    }
    let kinds: Vec<&str> = cost_secs
        .iter()
        .map(|s| get_value(s, "kind").unwrap_or("tabular"))
        .collect();
    let cost = if kinds.iter().all(|&k| k == "tabular") {
        let mut dists = Vec::with_capacity(k_n * c_n * j_n);
        for sec in &cost_secs {
            for c in 0..c_n {
                for j in 0..j_n {
                    let key = format!("dist.{c}.{j}");
                    let v = require(sec, &key)?;
                    dists.push(parse_tabular_dist(v)?);
                }
            }
        }
        CostModel::Tabular(TabularCost::new(k_n, c_n, j_n, dists)?)
    } else if kinds.iter().all(|&k| k == "linear") {
        let mut models = Vec::with_capacity(k_n);
        for sec in &cost_secs {
            let mu = parse_vector(require(sec, "mu_star")?, "mu_star")?;
            let sigma = parse_f64(require(sec, "noise")?, "cost noise")?;
            let psi = match get_value(sec, "psi") {
                Some("onehot") => {
                    if mu.len() != j_n {
                        return Err(InstanceError::Parse(
                            "onehot psi requires mu_star of length J".into(),
                        ));
                    }
                    FeatureMap::one_hot(c_n, j_n)
                }
                _ => parse_feature_section(sec, c_n, j_n, mu.len(), "psi")?,
            };
            models.push(LinearCostModel::new(mu, psi, sigma)?);
        }
        CostModel::Linear(models)
    } else {
        return Err(InstanceError::Parse(
            "cost sections must all share the same kind".into(),
        ));
    };

    let provisional = Instance::new(label, contexts, features, reward, cost, horizon, 1.0)?;
    let delta = if delta_raw == "auto" {
        let margin = crate::oracle::slater_margin(&provisional)
            .map_err(|e| InstanceError::InvalidConfig(format!("delta = auto: {e}")))?;
        if margin <= 1e-9 {
            return Err(InstanceError::InvalidConfig(
                "delta = auto but the instance has no Slater margin".into(),
            ));
        }
        margin
    } else {
        parse_f64(&delta_raw, "delta")?
    };
    provisional.with_delta(delta)
}

fn parse_feature_section(
    sec: &Section,
    c_n: usize,
    j_n: usize,
    d: usize,
    row_prefix: &str,
) -> Result<FeatureMap, InstanceError> {
    if sec.variant.as_deref() == Some("onehot") {
        if d != j_n {
            return Err(InstanceError::Parse(format!(
                "[{}|onehot] requires d = J (= {j_n}), got d = {d}",
                sec.name
            )));
        }
        return Ok(FeatureMap::one_hot(c_n, j_n));
    }
    let mut entries = Vec::with_capacity(c_n * j_n * d);
    for c in 0..c_n {
        for j in 0..j_n {
            let key = format!("{row_prefix}.{c}.{j}");
            let v = require(sec, &key)?;
            let row = parse_vector(v, &key)?;
            if row.len() != d {
                return Err(InstanceError::Parse(format!(
                    "{key} has {} entries, expected {d}",
                    row.len()
                )));
            }
            entries.extend(row);
        }
    }
    FeatureMap::new(c_n, j_n, d, entries)
}

fn parse_reward_noise(s: &str) -> Result<RewardNoise, InstanceError> {
    let mut parts = s.split_whitespace();
    match parts.next() {
        Some("bernoulli-residual") => Ok(RewardNoise::BernoulliResidual),
        Some("gaussian") => {
            let sigma = parse_f64(
                parts
                    .next()
                    .ok_or_else(|| InstanceError::Parse("gaussian noise needs a sigma".into()))?,
                "noise sigma",
            )?;
            Ok(RewardNoise::Gaussian { sigma })
        }
        _ => Err(InstanceError::Parse(format!("unknown reward noise `{s}`"))),
    }
}

fn parse_tabular_dist(s: &str) -> Result<TabularDist, InstanceError> {
    let toks: Vec<&str> = s.split_whitespace().collect();
    match toks.as_slice() {
        ["bernoulli", p, shift] => Ok(TabularDist::ShiftedBernoulli {
            p: parse_f64(p, "bernoulli p")?,
            shift: parse_f64(shift, "bernoulli shift")?,
        }),
        ["point", v] => Ok(TabularDist::Deterministic {
            value: parse_f64(v, "point value")?,
        }),
        _ => Err(InstanceError::Parse(format!(
            "bad cost distribution `{s}`; expected `bernoulli <p> <shift>` or `point <v>`"
        ))),
    }
}
