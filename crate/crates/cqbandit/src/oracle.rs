//! Exact LP solutions for the fluid baseline, its tightened variant, the
//! Slater margin, and an independent brute-force verifier.
//!
//! The baseline program maximizes expected per-round reward over
//! per-context action distributions subject to every cost aggregate
//! staying nonpositive; the tightened variant shifts each cost bound by
//! `-eps`. Problem sizes are tiny (|C| * J variables), so the solver is a
//! dense two-phase primal simplex with Bland's anti-cycling rule:
//! exactness and determinism matter more than speed here. A vertex
//! enumeration cross-check stays deliberately independent of the simplex
//! path.

use thiserror::Error;

use crate::instances::Instance;
use crate::linalg;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("instance too large for brute force: {size} > {cap} variables")]
    TooLarge { size: usize, cap: usize },
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),
    #[error("internal solver failure: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

/// Primal solution of a baseline/tightened program.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    /// Per-context action probabilities, flat `c * J + j`; empty when
    /// infeasible. Entries are clamped to `[0, inf)` on output.
    pub x: Vec<f64>,
    /// Optimal expected per-round reward; NaN when infeasible.
    pub objective: f64,
    pub status: LpStatus,
    /// Slack of each cost constraint at the solution:
    /// `-eps - sum_{c,j} p_c w_k(c,j) x_{c,j}` (nonnegative up to 1e-9).
    pub active_margin: Vec<f64>,
}

impl LpSolution {
    fn infeasible() -> Self {
        LpSolution {
            x: Vec::new(),
            objective: f64::NAN,
            status: LpStatus::Infeasible,
            active_margin: Vec::new(),
        }
    }
}

/// `p_c * r(c, j)` objective coefficients, flat `c * J + j`.
fn objective_coeffs(instance: &Instance) -> Vec<f64> {
    let (c_n, j_n) = (instance.n_contexts(), instance.n_actions());
    let p = instance.contexts.probs();
    let mut out = Vec::with_capacity(c_n * j_n);
    for c in 0..c_n {
        for j in 0..j_n {
            out.push(p[c] * instance.mean_reward(c, j));
        }
    }
    out
}

/// `p_c * w_k(c, j)` constraint coefficients, flat `c * J + j`.
fn constraint_coeffs(instance: &Instance, k: usize) -> Vec<f64> {
    let (c_n, j_n) = (instance.n_contexts(), instance.n_actions());
    let p = instance.contexts.probs();
    let mut out = Vec::with_capacity(c_n * j_n);
    for c in 0..c_n {
        for j in 0..j_n {
            out.push(p[c] * instance.mean_cost(c, j, k));
        }
    }
    out
}

fn simplex_rows(instance: &Instance) -> Vec<(Vec<f64>, f64)> {
    let (c_n, j_n) = (instance.n_contexts(), instance.n_actions());
    let n = c_n * j_n;
    (0..c_n)
        .map(|c| {
            let mut row = vec![0.0; n];
            for j in 0..j_n {
                row[c * j_n + j] = 1.0;
            }
            (row, 1.0)
        })
        .collect()
}

/// Solve the baseline program (tightness zero).
pub fn solve_baseline(instance: &Instance) -> LpSolution {
    solve_tightened(instance, 0.0)
}

/// Solve the tightened program: cost aggregates bounded by `-eps`.
pub fn solve_tightened(instance: &Instance, eps: f64) -> LpSolution {
    let k_n = instance.n_constraints();
    let n = instance.n_contexts() * instance.n_actions();
    let lp = simplex::DenseLp {
        n_vars: n,
        maximize: objective_coeffs(instance),
        eq_rows: simplex_rows(instance),
        le_rows: (0..k_n)
            .map(|k| (constraint_coeffs(instance, k), -eps))
            .collect(),
    };
    match simplex::solve(&lp) {
        simplex::LpOutcome::Infeasible => LpSolution::infeasible(),
        simplex::LpOutcome::Optimal { mut x, value } => {
            for xi in &mut x {
                if *xi < 0.0 {
                    *xi = 0.0;
                }
            }
            let active_margin = (0..k_n)
                .map(|k| -eps - linalg::dot(&constraint_coeffs(instance, k), &x))
                .collect();
            LpSolution {
                x,
                objective: value,
                status: LpStatus::Optimal,
                active_margin,
            }
        }
    }
}

/// Largest margin `delta` such that some feasible distribution keeps every
/// cost aggregate at or below `-delta`; capped at 1, zero when only
/// boundary-feasible.
pub fn slater_margin(instance: &Instance) -> Result<f64, OracleError> {
    let k_n = instance.n_constraints();
    let n = instance.n_contexts() * instance.n_actions();
    let mut le_rows: Vec<(Vec<f64>, f64)> = (0..k_n)
        .map(|k| {
            let mut row = constraint_coeffs(instance, k);
            row.push(1.0); // + margin <= 0
            (row, 0.0)
        })
        .collect();
    let mut cap_row = vec![0.0; n + 1];
    cap_row[n] = 1.0;
    le_rows.push((cap_row, 1.0)); // margin <= 1
    let mut maximize = vec![0.0; n + 1];
    maximize[n] = 1.0;
    let eq_rows = simplex_rows(instance)
        .into_iter()
        .map(|(mut row, b)| {
            row.push(0.0);
            (row, b)
        })
        .collect();
    let lp = simplex::DenseLp {
        n_vars: n + 1,
        maximize,
        eq_rows,
        le_rows,
    };
    match simplex::solve(&lp) {
        simplex::LpOutcome::Infeasible => Err(OracleError::Infeasible),
        simplex::LpOutcome::Optimal { x, .. } => Ok(x[n].clamp(0.0, 1.0)),
    }
}

/// Convex mixture `(1 - eps/delta) x_star + (eps/delta) x_interior`,
/// the standard feasible point of the eps-tightened program.
pub fn mixture(
    eps: f64,
    delta: f64,
    x_star: &LpSolution,
    x_interior: &LpSolution,
) -> Result<Vec<f64>, OracleError> {
    if eps < 0.0 || eps > delta {
        return Err(OracleError::InvalidMixture(format!(
            "eps = {eps} outside [0, delta = {delta}]"
        )));
    }
    if x_star.x.len() != x_interior.x.len() {
        return Err(OracleError::InvalidMixture("solution size mismatch".into()));
    }
    let lambda = if delta == 0.0 { 0.0 } else { eps / delta };
    Ok(x_star
        .x
        .iter()
        .zip(&x_interior.x)
        .map(|(&a, &b)| (1.0 - lambda) * a + lambda * b)
        .collect())
}

const BRUTE_FORCE_CAP: usize = 12;

/// Optimal value of the (possibly tightened) program by enumerating basic
/// feasible solutions. Independent of the simplex: vertices come from
/// solving active-constraint systems by Gaussian elimination.
pub fn brute_force_value(instance: &Instance, eps: f64) -> Result<f64, OracleError> {
    let (c_n, j_n, k_n) = (
        instance.n_contexts(),
        instance.n_actions(),
        instance.n_constraints(),
    );
    let n = c_n * j_n;
    if n > BRUTE_FORCE_CAP {
        return Err(OracleError::TooLarge {
            size: n,
            cap: BRUTE_FORCE_CAP,
        });
    }
    let obj = objective_coeffs(instance);
    let cons: Vec<Vec<f64>> = (0..k_n).map(|k| constraint_coeffs(instance, k)).collect();
    let eqs = simplex_rows(instance);

    let mut best: Option<f64> = None;
    // active sets: all |C| equalities, s of the K inequalities, and
    // n - |C| - s zero bounds
    for s in 0..=k_n {
        if c_n + s > n {
            break;
        }
        let zeros_needed = n - c_n - s;
        for_each_combination(k_n, s, &mut |active_k| {
            for_each_combination(n, zeros_needed, &mut |zero_vars| {
                let mut a = Vec::with_capacity(n * n);
                let mut b = Vec::with_capacity(n);
                for (row, rhs) in &eqs {
                    a.extend_from_slice(row);
                    b.push(*rhs);
                }
                for &k in active_k {
                    a.extend_from_slice(&cons[k]);
                    b.push(-eps);
                }
                for &z in zero_vars {
                    let mut row = vec![0.0; n];
                    row[z] = 1.0;
                    a.extend_from_slice(&row);
                    b.push(0.0);
                }
                let Some(x) = linalg::solve_general(&a, n, &b) else {
                    return;
                };
                if x.iter().any(|&xi| xi < -1e-9) {
                    return;
                }
                for (k, row) in cons.iter().enumerate() {
                    if active_k.contains(&k) {
                        continue;
                    }
                    if linalg::dot(row, &x) > -eps + 1e-9 {
                        return;
                    }
                }
                let value = linalg::dot(&obj, &x);
                best = Some(match best {
                    None => value,
                    Some(cur) => cur.max(value),
                });
            });
        });
    }
    best.ok_or(OracleError::Infeasible)
}

fn for_each_combination(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        let remaining = k - cur.len();
        for i in start..=n.saturating_sub(remaining) {
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    if k > n {
        return;
    }
    let mut cur = Vec::with_capacity(k);
    rec(0, n, k, &mut cur, f);
}

mod simplex {
    //! Dense two-phase primal simplex, Bland's rule throughout.

    const TOL: f64 = 1e-9;
    const FEAS_TOL: f64 = 1e-7;
    const MAX_PIVOTS: usize = 100_000;

    pub struct DenseLp {
        pub n_vars: usize,
        pub maximize: Vec<f64>,
        pub eq_rows: Vec<(Vec<f64>, f64)>,
        pub le_rows: Vec<(Vec<f64>, f64)>,
    }

    pub enum LpOutcome {
        Optimal { x: Vec<f64>, value: f64 },
        Infeasible,
    }

    struct Tableau {
        rows: Vec<Vec<f64>>,
        rhs: Vec<f64>,
        basis: Vec<usize>,
        n_total: usize,
    }

    impl Tableau {
        fn pivot(&mut self, row: usize, col: usize) {
            let d = self.rows[row][col];
            for v in self.rows[row].iter_mut() {
                *v /= d;
            }
            self.rhs[row] /= d;
            for i in 0..self.rows.len() {
                if i == row {
                    continue;
                }
                let f = self.rows[i][col];
                if f == 0.0 {
                    continue;
                }
                for j in 0..self.n_total {
                    let upd = self.rows[row][j];
                    self.rows[i][j] -= f * upd;
                }
                self.rhs[i] -= f * self.rhs[row];
            }
            self.basis[row] = col;
        }

        /// Bland-rule simplex on the current basis; `allowed` bounds the
        /// columns that may enter. Returns false on pivot-limit overrun
        /// (unreachable with Bland's rule on bounded problems).
        fn maximize(&mut self, cost: &[f64], allowed: usize) -> bool {
            let mut reduced = cost.to_vec();
            for (i, &b) in self.basis.iter().enumerate() {
                let cb = cost[b];
                if cb != 0.0 {
                    for j in 0..self.n_total {
                        reduced[j] -= cb * self.rows[i][j];
                    }
                }
            }
            for _ in 0..MAX_PIVOTS {
                let mut entering = None;
                for j in 0..allowed {
                    if reduced[j] > TOL {
                        entering = Some(j);
                        break;
                    }
                }
                let Some(col) = entering else {
                    return true;
                };
                let mut leave: Option<(usize, f64)> = None;
                for i in 0..self.rows.len() {
                    let a = self.rows[i][col];
                    if a > TOL {
                        let ratio = self.rhs[i] / a;
                        let better = match leave {
                            None => true,
                            Some((li, lr)) => {
                                ratio < lr - TOL
                                    || (ratio < lr + TOL && self.basis[i] < self.basis[li])
                            }
                        };
                        if better {
                            leave = Some((i, ratio));
                        }
                    }
                }
                let Some((row, _)) = leave else {
                    // unbounded; cannot happen for products of simplices
                    return false;
                };
                let f = reduced[col];
                self.pivot(row, col);
                for j in 0..self.n_total {
                    reduced[j] -= f * self.rows[row][j];
                }
                reduced[col] = 0.0;
            }
            false
        }
    }

    pub fn solve(lp: &DenseLp) -> LpOutcome {
        let n = lp.n_vars;
        let n_le = lp.le_rows.len();
        let m = lp.eq_rows.len() + n_le;
        // columns: structural | slack/surplus | artificial
        let slack_start = n;
        let art_start = n + n_le;
        let mut n_art = 0;
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut rhs: Vec<f64> = Vec::with_capacity(m);
        let mut basis: Vec<usize> = Vec::with_capacity(m);
        let mut art_cols: Vec<Option<usize>> = Vec::with_capacity(m);

        for (idx, (a, b)) in lp.le_rows.iter().enumerate() {
            let flip = *b < 0.0;
            let sign = if flip { -1.0 } else { 1.0 };
            let mut row = vec![0.0; n + n_le];
            for (j, &v) in a.iter().enumerate() {
                row[j] = sign * v;
            }
            row[slack_start + idx] = sign; // slack (or surplus when flipped)
            rows.push(row);
            rhs.push(sign * b);
            if flip {
                art_cols.push(Some(n_art));
                n_art += 1;
                basis.push(usize::MAX); // patched below
            } else {
                art_cols.push(None);
                basis.push(slack_start + idx);
            }
        }
        for (a, b) in &lp.eq_rows {
            let flip = *b < 0.0;
            let sign = if flip { -1.0 } else { 1.0 };
            let mut row = vec![0.0; n + n_le];
            for (j, &v) in a.iter().enumerate() {
                row[j] = sign * v;
            }
            rows.push(row);
            rhs.push(sign * b);
            art_cols.push(Some(n_art));
            n_art += 1;
            basis.push(usize::MAX);
        }
        let n_total = n + n_le + n_art;
        for (i, row) in rows.iter_mut().enumerate() {
            row.resize(n_total, 0.0);
            if let Some(a) = art_cols[i] {
                row[art_start + a] = 1.0;
                basis[i] = art_start + a;
            }
        }

        let mut tab = Tableau {
            rows,
            rhs,
            basis,
            n_total,
        };

        if n_art > 0 {
            let mut phase1 = vec![0.0; n_total];
            for c in art_start..n_total {
                phase1[c] = -1.0;
            }
            if !tab.maximize(&phase1, n_total) {
                return LpOutcome::Infeasible;
            }
            let infeas: f64 = tab
                .basis
                .iter()
                .zip(&tab.rhs)
                .filter(|(b, _)| **b >= art_start)
                .map(|(_, &v)| v)
                .sum();
            if infeas > FEAS_TOL {
                return LpOutcome::Infeasible;
            }
            // drive remaining zero-level artificials out of the basis
            for i in 0..tab.rows.len() {
                if tab.basis[i] >= art_start {
                    if let Some(col) = (0..art_start).find(|&j| tab.rows[i][j].abs() > FEAS_TOL) {
                        tab.pivot(i, col);
                    }
                    // an all-zero row is redundant; leaving the artificial
                    // basic at level zero is harmless
                }
            }
        }

        let mut cost = vec![0.0; n_total];
        cost[..n].copy_from_slice(&lp.maximize);
        if !tab.maximize(&cost, art_start) {
            return LpOutcome::Infeasible;
        }

        let mut x = vec![0.0; n];
        for (i, &b) in tab.basis.iter().enumerate() {
            if b < n {
                x[b] = tab.rhs[i];
            }
        }
        let value = lp.maximize.iter().zip(&x).map(|(c, xi)| c * xi).sum();
        LpOutcome::Optimal { x, value }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{mab_default, mab_instance, synth_instance, RewardNoise, SynthSpec};

    fn tiny_spec(c: usize, j: usize, k: usize) -> SynthSpec {
        SynthSpec {
            n_contexts: c,
            n_actions: j,
            n_constraints: k,
            feature_dim: None,
            noise: RewardNoise::BernoulliResidual,
            cost_range: (-0.8, 0.8),
            ensure_safe_action: true,
            horizon: 10,
        }
    }

    #[test]
    fn mab_baseline_is_pure_best_arm() {
        let sol = solve_baseline(&mab_default(10));
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.objective, 0.7);
        assert!((sol.x[3] - 1.0).abs() < 1e-9);
        assert!(sol.x[..3].iter().all(|&v| v < 1e-9));
        assert!((sol.active_margin[0] - 0.3).abs() < 1e-9);
    }

    #[test]
    fn slack_constraints_reduce_to_argmax() {
        // every action costs -1, so the LP is the unconstrained argmax
        let inst = synth_instance(
            &SynthSpec {
                cost_range: (-1.0, -1.0),
                ensure_safe_action: false,
                ..tiny_spec(2, 3, 2)
            },
            5,
        )
        .unwrap();
        let sol = solve_baseline(&inst);
        let mut want = 0.0;
        for c in 0..2 {
            let best = (0..3)
                .map(|j| inst.mean_reward(c, j))
                .fold(f64::NEG_INFINITY, f64::max);
            want += inst.contexts.probs()[c] * best;
        }
        assert!((sol.objective - want).abs() < 1e-9);
    }

    #[test]
    fn boundary_binding_two_action_case() {
        // rewards (1, 0), one deterministic cost (1, -1): optimum splits mass
        use crate::instances::{
            ContextDistribution, CostModel, FeatureMap, Instance, RewardModel, TabularCost,
            TabularDist,
        };
        let inst = Instance::new(
            "boundary",
            ContextDistribution::new(vec![1.0]).unwrap(),
            FeatureMap::one_hot(1, 2),
            RewardModel::new(vec![1.0, 0.0], 1.0, RewardNoise::BernoulliResidual).unwrap(),
            CostModel::Tabular(
                TabularCost::new(
                    1,
                    1,
                    2,
                    vec![
                        TabularDist::Deterministic { value: 1.0 },
                        TabularDist::Deterministic { value: -1.0 },
                    ],
                )
                .unwrap(),
            ),
            10,
            1.0,
        )
        .unwrap();
        let sol = solve_baseline(&inst);
        assert!((sol.x[0] - 0.5).abs() < 1e-9);
        assert!((sol.x[1] - 0.5).abs() < 1e-9);
        assert!((sol.objective - 0.5).abs() < 1e-9);
        assert!(sol.active_margin[0].abs() < 1e-9); // w . x = 0
    }

    #[test]
    fn tightened_examples() {
        let inst = mab_default(10);
        let base = solve_baseline(&inst);
        let zero = solve_tightened(&inst, 0.0);
        assert_eq!(base, zero);
        let t3 = solve_tightened(&inst, 0.3);
        assert_eq!(t3.status, LpStatus::Optimal);
        assert!((t3.objective - 0.7).abs() < 1e-9);
        assert!((t3.x[3] - 1.0).abs() < 1e-9);
        assert!(t3.active_margin[0].abs() < 1e-9); // margin exactly used up
        let t6 = solve_tightened(&inst, 0.6);
        assert_eq!(t6.status, LpStatus::Infeasible);
        assert!(t6.objective.is_nan());
    }

    #[test]
    fn tightened_objective_is_nonincreasing() {
        let inst = synth_instance(&tiny_spec(2, 3, 2), 17).unwrap();
        let delta = slater_margin(&inst).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..=10 {
            let eps = delta * i as f64 / 10.0;
            let sol = solve_tightened(&inst, eps);
            assert_eq!(sol.status, LpStatus::Optimal, "eps = {eps}");
            assert!(sol.objective <= prev + 1e-9);
            prev = sol.objective;
        }
    }

    #[test]
    fn slater_margin_examples() {
        assert_eq!(slater_margin(&mab_default(10)).unwrap(), 0.5);
        // all costs -1: margin capped at 1
        let inst = synth_instance(
            &SynthSpec {
                cost_range: (-1.0, -1.0),
                ensure_safe_action: false,
                ..tiny_spec(1, 2, 1)
            },
            3,
        )
        .unwrap();
        assert_eq!(slater_margin(&inst).unwrap(), 1.0);
        // single action with zero cost: boundary feasible only
        let zero = synth_instance(
            &SynthSpec {
                cost_range: (0.0, 0.0),
                ensure_safe_action: false,
                ..tiny_spec(1, 1, 1)
            },
            3,
        )
        .unwrap();
        assert!(slater_margin(&zero).unwrap().abs() < 1e-9);
    }

    #[test]
    fn infeasible_when_every_action_costs() {
        let inst = synth_instance(
            &SynthSpec {
                cost_range: (0.2, 0.8),
                ensure_safe_action: false,
                ..tiny_spec(1, 2, 1)
            },
            11,
        )
        .unwrap();
        assert_eq!(solve_baseline(&inst).status, LpStatus::Infeasible);
        assert!(matches!(slater_margin(&inst), Err(OracleError::Infeasible)));
        assert!(matches!(
            brute_force_value(&inst, 0.0),
            Err(OracleError::Infeasible)
        ));
    }

    #[test]
    fn mixture_examples() {
        let inst = mab_default(10);
        let x_star = solve_baseline(&inst);
        // interior point: pure arm 0 (margin 0.5)
        let x_in = LpSolution {
            x: vec![1.0, 0.0, 0.0, 0.0],
            objective: 0.1,
            status: LpStatus::Optimal,
            active_margin: vec![0.5],
        };
        assert_eq!(mixture(0.0, 0.5, &x_star, &x_in).unwrap(), x_star.x);
        assert_eq!(mixture(0.5, 0.5, &x_star, &x_in).unwrap(), x_in.x);
        let mid = mixture(0.25, 0.5, &x_star, &x_in).unwrap();
        // feasible for the 0.25-tightened program, with objective within
        // eps/delta of the baseline
        let w = [-0.5, -0.1, 0.0, -0.3];
        let agg: f64 = w.iter().zip(&mid).map(|(wi, xi)| wi * xi).sum();
        assert!(agg <= -0.25 + 1e-12);
        let obj: f64 = [0.1, 0.2, 0.4, 0.7]
            .iter()
            .zip(&mid)
            .map(|(r, xi)| r * xi)
            .sum();
        assert!(obj >= 0.7 - 0.5 - 1e-12);
        assert!(mixture(0.6, 0.5, &x_star, &x_in).is_err());
    }

    #[test]
    fn brute_force_examples() {
        let inst = mab_default(10);
        assert!((brute_force_value(&inst, 0.0).unwrap() - 0.7).abs() < 1e-12);
        // single action: value is that action's reward (feasible since cost < 0)
        let single = mab_instance(&[0.4], &[0.1], 0.5, 10).unwrap();
        assert!((brute_force_value(&single, 0.0).unwrap() - 0.4).abs() < 1e-12);
        // cap
        let big = synth_instance(
            &SynthSpec {
                ..tiny_spec(4, 4, 1)
            },
            1,
        )
        .unwrap();
        assert!(matches!(
            brute_force_value(&big, 0.0),
            Err(OracleError::TooLarge { .. })
        ));
    }

    #[test]
    fn simplex_matches_enumeration_on_random_instances() {
        let mut checked = 0;
        for seed in 0..100u64 {
            let spec = SynthSpec {
                n_contexts: 1 + (seed as usize % 2),
                n_actions: 1 + (seed as usize % 3),
                n_constraints: 1 + (seed as usize / 3 % 2),
                ensure_safe_action: seed % 4 != 0,
                ..tiny_spec(1, 1, 1)
            };
            let inst = synth_instance(&spec, 1000 + seed).unwrap();
            let lp = solve_baseline(&inst);
            match brute_force_value(&inst, 0.0) {
                Ok(v) => {
                    assert_eq!(lp.status, LpStatus::Optimal, "seed {seed}");
                    assert!(
                        (lp.objective - v).abs() < 1e-7,
                        "seed {seed}: simplex {} vs enumeration {v}",
                        lp.objective
                    );
                    checked += 1;
                }
                Err(OracleError::Infeasible) => {
                    assert_eq!(lp.status, LpStatus::Infeasible, "seed {seed}");
                }
                Err(e) => panic!("seed {seed}: {e}"),
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn tightening_gap_obeys_margin_bound() {
        for seed in 0..40u64 {
            let inst = synth_instance(&tiny_spec(2, 3, 2), 2000 + seed).unwrap();
            let delta = slater_margin(&inst).unwrap();
            if delta < 1e-9 {
                continue;
            }
            let base = solve_baseline(&inst).objective;
            for i in 0..=10 {
                let eps = delta * i as f64 / 10.0;
                let t = solve_tightened(&inst, eps);
                assert_eq!(t.status, LpStatus::Optimal);
                assert!(
                    base - t.objective <= eps / delta + 1e-9,
                    "seed {seed} eps {eps}: gap {} > {}",
                    base - t.objective,
                    eps / delta
                );
            }
        }
    }

    #[test]
    fn zero_probability_context_is_harmless() {
        // a context that never occurs contributes nothing to the objective
        // or constraints but still carries a simplex row
        use crate::instances::{
            ContextDistribution, CostModel, FeatureMap, Instance, RewardModel, TabularCost,
            TabularDist,
        };
        let dists = vec![
            TabularDist::Deterministic { value: -0.4 },
            TabularDist::Deterministic { value: 0.2 },
            TabularDist::Deterministic { value: -0.4 },
            TabularDist::Deterministic { value: 0.2 },
        ];
        let inst = Instance::new(
            "zerop",
            ContextDistribution::new(vec![1.0, 0.0]).unwrap(),
            FeatureMap::one_hot(2, 2),
            RewardModel::new(vec![0.2, 0.9], 1.0, RewardNoise::BernoulliResidual).unwrap(),
            CostModel::Tabular(TabularCost::new(1, 2, 2, dists).unwrap()),
            10,
            0.4,
        )
        .unwrap();
        let sol = solve_baseline(&inst);
        assert_eq!(sol.status, LpStatus::Optimal);
        // optimum mixes the two arms of context 0 on the boundary:
        // -0.4 x0 + 0.2 x1 = 0 gives x1 = 2/3, objective 0.2/3 + 0.6
        assert!((sol.objective - (0.2 / 3.0 + 0.9 * 2.0 / 3.0)).abs() < 1e-9);
        let brute = brute_force_value(&inst, 0.0).unwrap();
        assert!((sol.objective - brute).abs() < 1e-9);
        // the dead context's row still sums to one
        let row: f64 = sol.x[2..4].iter().sum();
        assert!((row - 1.0).abs() < 1e-9);
    }
}
