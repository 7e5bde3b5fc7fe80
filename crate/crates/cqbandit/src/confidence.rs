//! Ridge-regression state and confidence-ellipsoid queries.
//!
//! [`RidgeState`] maintains the regularized covariance `Sigma = I + sum
//! phi phi^T`, its inverse (rank-one updates with periodic dense
//! refactorization), the response accumulator `b`, and the estimate
//! `theta_hat = Sigma^{-1} b`. The ellipsoid extrema used by the policy
//! have closed forms:
//!
//! - optimistic reward: `min(1, <theta_hat, phi> + sqrt(beta) * ||phi||_{Sigma^{-1}})`
//! - pessimistic cost:  `clamp(<theta_hat, psi> - sqrt(beta) * ||psi||_{Sigma^{-1}}, -1, 1)`
//!
//! with radius `sqrt(beta_t(p)) = m + sqrt(2 log(1/p) + d log((d + t) / d))`
//! after `t` updates.

use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error)]
pub enum ConfidenceError {
    #[error("numerical degeneracy: inverse drift {drift} after refactorization")]
    NumericalDegeneracy { drift: f64 },
}

/// Refactorize the maintained inverse after this many rank-one updates.
const REFACTOR_INTERVAL: u64 = 1024;
/// Dense refactorization triggers when drift exceeds this.
const DRIFT_REFACTOR: f64 = 1e-10;
/// Hard invariant; exceeding it even after refactorization is a bug.
const DRIFT_FATAL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeState {
    d: usize,
    sigma: Vec<f64>,
    sigma_inv: Vec<f64>,
    b: Vec<f64>,
    theta_hat: Vec<f64>,
    n_updates: u64,
}

/// Confidence radius `sqrt(beta)` together with the tail probability it
/// was computed for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radius {
    pub beta_sqrt: f64,
    pub p: f64,
}

pub fn ridge_init(d: usize) -> RidgeState {
    assert!(d >= 1, "dimension must be positive");
    RidgeState {
        d,
        sigma: linalg::identity(d),
        sigma_inv: linalg::identity(d),
        b: vec![0.0; d],
        theta_hat: vec![0.0; d],
        n_updates: 0,
    }
}

/// `sqrt(beta_t(p))` after `t` rank-one updates.
pub fn radius(t: u64, d: usize, m: f64, p: f64) -> Radius {
    debug_assert!(p > 0.0 && p < 1.0);
    let d = d as f64;
    let beta_sqrt = m + (2.0 * (1.0 / p).ln() + d * ((d + t as f64) / d).ln()).sqrt();
    Radius { beta_sqrt, p }
}

impl RidgeState {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_updates(&self) -> u64 {
        self.n_updates
    }

    pub fn theta_hat(&self) -> &[f64] {
        &self.theta_hat
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn sigma_inv(&self) -> &[f64] {
        &self.sigma_inv
    }

    /// Fold in one observation `(phi, y)`: `Sigma += phi phi^T`,
    /// `b += y phi`, inverse via the rank-one inverse-update identity.
    pub fn rank_one_update(&mut self, phi: &[f64], y: f64) -> Result<(), ConfidenceError> {
        debug_assert_eq!(phi.len(), self.d);
        let d = self.d;
        linalg::add_outer(&mut self.sigma, d, phi, 1.0);
        // Sigma_inv -= (Sigma_inv phi)(Sigma_inv phi)^T / (1 + phi^T Sigma_inv phi)
        let u = linalg::mat_vec(&self.sigma_inv, d, phi);
        let denom = 1.0 + linalg::dot(phi, &u);
        linalg::add_outer(&mut self.sigma_inv, d, &u, -1.0 / denom);
        for i in 0..d {
            self.b[i] += y * phi[i];
        }
        self.theta_hat = linalg::mat_vec(&self.sigma_inv, d, &self.b);
        self.n_updates += 1;
        if self.n_updates % REFACTOR_INTERVAL == 0 {
            self.check_and_refactor()?;
        }
        Ok(())
    }

    fn check_and_refactor(&mut self) -> Result<(), ConfidenceError> {
        let drift = linalg::inverse_drift(&self.sigma, &self.sigma_inv, self.d);
        if drift > DRIFT_REFACTOR {
            if let Some(inv) = linalg::spd_inverse(&self.sigma, self.d) {
                self.sigma_inv = inv;
                self.theta_hat = linalg::mat_vec(&self.sigma_inv, self.d, &self.b);
            }
            let drift = linalg::inverse_drift(&self.sigma, &self.sigma_inv, self.d);
            if drift > DRIFT_FATAL {
                return Err(ConfidenceError::NumericalDegeneracy { drift });
            }
        }
        Ok(())
    }

    /// max |Sigma Sigma_inv - I|; test hook for the consistency invariant.
    pub fn inverse_drift(&self) -> f64 {
        linalg::inverse_drift(&self.sigma, &self.sigma_inv, self.d)
    }
}

/// Closed-form maximum of `<theta, phi>` over the confidence ellipsoid,
/// clipped at 1.
pub fn optimistic_reward(state: &RidgeState, radius: &Radius, phi: &[f64]) -> f64 {
    let mean = linalg::dot(state.theta_hat(), phi);
    let width = linalg::quad_form(&state.sigma_inv, state.d, phi)
        .max(0.0)
        .sqrt();
    (mean + radius.beta_sqrt * width).min(1.0)
}

/// Closed-form minimum of `<mu, psi>` over the ellipsoid, clamped to
/// `[-1, 1]` (costs are bounded both sides, unlike the reward clip).
pub fn pessimistic_cost(state: &RidgeState, radius: &Radius, psi: &[f64]) -> f64 {
    let mean = linalg::dot(state.theta_hat(), psi);
    let width = linalg::quad_form(&state.sigma_inv, state.d, psi)
        .max(0.0)
        .sqrt();
    (mean - radius.beta_sqrt * width).clamp(-1.0, 1.0)
}

/// Whether `theta` lies in the ellipsoid `||theta - theta_hat||_Sigma <=
/// sqrt(beta)` (boundary inclusive).
pub fn contains(state: &RidgeState, radius: &Radius, theta: &[f64]) -> bool {
    estimate_error(state, theta) <= radius.beta_sqrt
}

/// `||theta - theta_hat||_Sigma`; also dumped by the confidence trace.
pub fn estimate_error(state: &RidgeState, theta: &[f64]) -> f64 {
    debug_assert_eq!(theta.len(), state.d);
    let diff: Vec<f64> = theta
        .iter()
        .zip(state.theta_hat())
        .map(|(a, b)| a - b)
        .collect();
    linalg::quad_form(&state.sigma, state.d, &diff)
        .max(0.0)
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{standard_normal, RunRng, StreamPurpose};
    use rand::Rng;

    #[test]
    fn init_is_identity() {
        let s = ridge_init(1);
        assert_eq!(s.sigma(), &[1.0]);
        assert_eq!(s.theta_hat(), &[0.0]);
        let s3 = ridge_init(3);
        assert_eq!(s3.sigma_inv(), &linalg::identity(3)[..]);
        // the center always belongs to the ellipsoid
        let r = Radius {
            beta_sqrt: 0.3,
            p: 0.01,
        };
        assert!(contains(&s3, &r, &[0.0, 0.0, 0.0]));
    }

    #[test]
    fn rank_one_closed_form() {
        let mut s = ridge_init(2);
        s.rank_one_update(&[1.0, 0.0], 1.0).unwrap();
        assert_eq!(s.sigma(), &[2.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.sigma_inv(), &[0.5, 0.0, 0.0, 1.0]);
        assert_eq!(s.theta_hat(), &[0.5, 0.0]);
    }

    #[test]
    fn zero_vector_update_is_inert() {
        let mut s = ridge_init(3);
        let before = s.clone();
        s.rank_one_update(&[0.0, 0.0, 0.0], 5.0).unwrap();
        assert_eq!(s.sigma(), before.sigma());
        assert_eq!(s.theta_hat(), before.theta_hat());
        assert_eq!(s.n_updates(), 1);
    }

    #[test]
    fn matches_dense_solve_after_many_updates() {
        // independent oracle: rebuild Sigma and b from the update log and
        // solve (I + Phi Phi^T) theta = Phi^T y densely
        let d = 5;
        let mut s = ridge_init(d);
        let rng = RunRng::new(42);
        let mut stream = rng.stream(0, StreamPurpose::InstanceGen);
        let mut log: Vec<(Vec<f64>, f64)> = Vec::new();
        for _ in 0..1000 {
            let raw: Vec<f64> = (0..d).map(|_| stream.gen::<f64>() - 0.5).collect();
            let norm = linalg::norm2(&raw);
            let phi: Vec<f64> = raw.iter().map(|x| x / norm.max(1.0)).collect();
            let y = standard_normal(&mut stream);
            s.rank_one_update(&phi, y).unwrap();
            log.push((phi, y));
        }
        let mut sigma = linalg::identity(d);
        let mut b = vec![0.0; d];
        for (phi, y) in &log {
            linalg::add_outer(&mut sigma, d, phi, 1.0);
            for i in 0..d {
                b[i] += y * phi[i];
            }
        }
        let l = linalg::cholesky(&sigma, d).unwrap();
        let direct = linalg::cholesky_solve(&l, d, &b);
        for i in 0..d {
            assert!(
                (direct[i] - s.theta_hat()[i]).abs() < 1e-8,
                "component {i}: {} vs {}",
                direct[i],
                s.theta_hat()[i]
            );
        }
        assert!(s.inverse_drift() < 1e-8);
    }

    #[test]
    fn radius_examples() {
        let t_horizon = 1000.0f64;
        let r = radius(0, 4, 0.8, 1.0 / t_horizon);
        assert!((r.beta_sqrt - (0.8 + (2.0 * t_horizon.ln()).sqrt())).abs() < 1e-12);
        // d term vanishes at t = 0
        let r0 = radius(0, 7, 0.0, 0.5);
        assert!((r0.beta_sqrt - (2.0 * 2.0f64.ln()).sqrt()).abs() < 1e-12);
        // t = d substitution
        let d = 6;
        let rd = radius(d as u64, d, 1.0, 0.1);
        let want = 1.0 + (2.0 * 10.0f64.ln() + d as f64 * 2.0f64.ln()).sqrt();
        assert!((rd.beta_sqrt - want).abs() < 1e-12);
    }

    #[test]
    fn radius_is_monotone_in_t() {
        let mut prev = 0.0;
        for t in 0..200 {
            let r = radius(t, 3, 0.5, 1e-3);
            assert!(r.beta_sqrt >= prev);
            prev = r.beta_sqrt;
        }
    }

    #[test]
    fn optimistic_reward_examples() {
        let s = ridge_init(2);
        let half = Radius {
            beta_sqrt: 0.5,
            p: 0.1,
        };
        assert!((optimistic_reward(&s, &half, &[1.0, 0.0]) - 0.5).abs() < 1e-15);
        let big = Radius {
            beta_sqrt: 10.0,
            p: 0.1,
        };
        assert_eq!(optimistic_reward(&s, &big, &[0.3, 0.1]), 1.0);
        // after one update: theta_hat = (0.5, 0), Sigma = diag(2, 1)
        let mut s = ridge_init(2);
        s.rank_one_update(&[1.0, 0.0], 1.0).unwrap();
        let one = Radius {
            beta_sqrt: 1.0,
            p: 0.1,
        };
        // 0.5 + sqrt(0.5) > 1, so the clip binds
        assert_eq!(optimistic_reward(&s, &one, &[1.0, 0.0]), 1.0);
        let small = Radius {
            beta_sqrt: 0.1,
            p: 0.1,
        };
        let want = 0.5 + 0.1 * 0.5f64.sqrt();
        assert!((optimistic_reward(&s, &small, &[1.0, 0.0]) - want).abs() < 1e-15);
    }

    #[test]
    fn pessimistic_cost_examples() {
        let s = ridge_init(2);
        let half = Radius {
            beta_sqrt: 0.5,
            p: 0.1,
        };
        assert!((pessimistic_cost(&s, &half, &[1.0, 0.0]) + 0.5).abs() < 1e-15);
        let big = Radius {
            beta_sqrt: 10.0,
            p: 0.1,
        };
        assert_eq!(pessimistic_cost(&s, &big, &[1.0, 0.0]), -1.0);
        assert_eq!(pessimistic_cost(&s, &half, &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn contains_boundary_inclusive() {
        let s = ridge_init(2);
        let r = Radius {
            beta_sqrt: 0.5,
            p: 0.1,
        };
        assert!(contains(&s, &r, &[0.5, 0.0]));
        assert!(!contains(&s, &r, &[0.5000001, 0.0]));
        // the center is inside for any radius
        let zero = Radius {
            beta_sqrt: 0.0,
            p: 0.1,
        };
        assert!(contains(&s, &zero, &[0.0, 0.0]));
    }

    #[test]
    fn overestimates_under_coverage() {
        // whenever theta_star is inside the ellipsoid, the optimistic
        // estimate dominates the true mean (for means <= 1)
        let d = 3;
        let theta_star = [0.4, 0.2, 0.1];
        let mut s = ridge_init(d);
        let rng = RunRng::new(9);
        let mut stream = rng.stream(0, StreamPurpose::InstanceGen);
        for t in 0..500u64 {
            let rad = radius(t, d, 0.6, 1e-3);
            let raw: Vec<f64> = (0..d).map(|_| stream.gen::<f64>()).collect();
            let norm = linalg::norm2(&raw);
            let phi: Vec<f64> = raw.iter().map(|x| x / norm.max(1.0)).collect();
            if contains(&s, &rad, &theta_star) {
                let truth = linalg::dot(&theta_star, &phi);
                assert!(optimistic_reward(&s, &rad, &phi) >= truth.min(1.0) - 1e-12);
            }
            let y = linalg::dot(&theta_star, &phi) + 0.3 * standard_normal(&mut stream);
            s.rank_one_update(&phi, y).unwrap();
        }
    }
}
