//! Virtual queues and the `V_t` / `eps_t` schedules.
//!
//! Each constraint carries a nonnegative queue tracking its cumulative
//! violation plus the injected tightness `eps_t`; `Q^(k)(t) / V_t` plays
//! the role of a dynamic Lagrange multiplier. Schedules are pluggable
//! because the published experiment configurations use different
//! constants than the theory-driven ones.

use crate::instances::Instance;

/// The K nonnegative virtual queues.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueVector {
    q: Vec<f64>,
}

impl QueueVector {
    pub fn zeros(k: usize) -> Self {
        QueueVector { q: vec![0.0; k] }
    }

    /// Build from explicit values; entries must be nonnegative.
    pub fn from_values(q: Vec<f64>) -> Self {
        debug_assert!(q.iter().all(|&x| x >= 0.0));
        QueueVector { q }
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }
}

/// One queue step: `q'[k] = max(0, q[k] + chosen_costs[k] + eps)`.
pub fn dual_update(q: &QueueVector, chosen_costs: &[f64], eps: f64) -> QueueVector {
    debug_assert_eq!(q.len(), chosen_costs.len());
    QueueVector {
        q: q.q
            .iter()
            .zip(chosen_costs)
            .map(|(&qi, &w)| (qi + w + eps).max(0.0))
            .collect(),
    }
}

/// Weight and tightness schedules. `v(t)` scales the multiplier down,
/// `eps(t)` tightens the budget; both are evaluated at the pre-update
/// round index.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    /// `V_t = delta K^0.25 sqrt(2t/3)`, `eps_t = K^0.75 sqrt(6/t)`.
    TheoryMain { delta: f64, n_constraints: usize },
    /// `V_t = delta d sqrt(t) log(1+T) / 4`, `eps_t = 4 d log(1+T) / sqrt(t)`.
    TheoryLinearCost {
        delta: f64,
        d: usize,
        horizon: usize,
    },
    /// `V_t = sqrt(t)`, `eps_t = 6 / sqrt(t)`.
    ExperimentMab,
    /// `V_t = 4 sqrt(t)`, `eps_t = 1 / sqrt(t)`.
    ExperimentWard,
    /// `V_t = v_coef sqrt(t)`, `eps_t = eps_coef / sqrt(t)`.
    Custom { v_coef: f64, eps_coef: f64 },
}

/// Schedule kinds as they appear in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    TheoryMain,
    TheoryLinearCost,
    ExperimentMab,
    ExperimentWard,
    Custom,
}

impl Schedule {
    /// Instantiate a schedule for an instance; K, delta, d, and T all come
    /// from the instance so configs cannot drift out of sync.
    pub fn for_instance(kind: ScheduleKind, instance: &Instance) -> Schedule {
        match kind {
            ScheduleKind::TheoryMain => Schedule::TheoryMain {
                delta: instance.delta,
                n_constraints: instance.n_constraints(),
            },
            ScheduleKind::TheoryLinearCost => Schedule::TheoryLinearCost {
                delta: instance.delta,
                d: instance.d(),
                horizon: instance.horizon,
            },
            ScheduleKind::ExperimentMab => Schedule::ExperimentMab,
            ScheduleKind::ExperimentWard => Schedule::ExperimentWard,
            ScheduleKind::Custom => Schedule::Custom {
                v_coef: 1.0,
                eps_coef: 1.0,
            },
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Schedule::TheoryMain { .. } => "theory-main",
            Schedule::TheoryLinearCost { .. } => "theory-linear-cost",
            Schedule::ExperimentMab => "experiment-mab",
            Schedule::ExperimentWard => "experiment-ward",
            Schedule::Custom { .. } => "custom",
        }
    }

    pub fn v(&self, t: usize) -> f64 {
        debug_assert!(t >= 1);
        let tf = t as f64;
        match *self {
            Schedule::TheoryMain {
                delta,
                n_constraints,
            } => delta * quarter_root(n_constraints as f64) * (2.0 * tf / 3.0).sqrt(),
            Schedule::TheoryLinearCost { delta, d, horizon } => {
                delta * d as f64 * tf.sqrt() * (1.0 + horizon as f64).ln() / 4.0
            }
            Schedule::ExperimentMab => tf.sqrt(),
            Schedule::ExperimentWard => 4.0 * tf.sqrt(),
            Schedule::Custom { v_coef, .. } => v_coef * tf.sqrt(),
        }
    }

    pub fn eps(&self, t: usize) -> f64 {
        debug_assert!(t >= 1);
        let tf = t as f64;
        match *self {
            Schedule::TheoryMain { n_constraints, .. } => {
                let k = n_constraints as f64;
                k.sqrt() * quarter_root(k) * (6.0 / tf).sqrt()
            }
            Schedule::TheoryLinearCost { d, horizon, .. } => {
                4.0 * d as f64 * (1.0 + horizon as f64).ln() / tf.sqrt()
            }
            Schedule::ExperimentMab => 6.0 / tf.sqrt(),
            Schedule::ExperimentWard => 1.0 / tf.sqrt(),
            Schedule::Custom { eps_coef, .. } => eps_coef / tf.sqrt(),
        }
    }

    /// Smallest round with `eps_t <= delta / 2` (the tightness stops
    /// dominating the Slater margin from here on). `None` when it does not
    /// happen within `cap` rounds.
    pub fn tau_prime(&self, delta: f64, cap: usize) -> Option<usize> {
        if self.eps(cap) > delta / 2.0 {
            return None;
        }
        // eps is nonincreasing: bisect
        let (mut lo, mut hi) = (1usize, cap);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.eps(mid) <= delta / 2.0 {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Some(lo)
    }
}

/// x^(1/4) as two correctly rounded square roots; unlike `powf` this is
/// bit-identical across platforms.
fn quarter_root(x: f64) -> f64 {
    x.sqrt().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn v_examples() {
        let s = Schedule::TheoryMain {
            delta: 1.0,
            n_constraints: 1,
        };
        assert!((s.v(6) - 2.0).abs() < 1e-12);
        assert!((Schedule::ExperimentMab.v(100) - 10.0).abs() < 1e-12);
        assert!((Schedule::ExperimentWard.v(4) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn eps_examples() {
        let s = Schedule::TheoryMain {
            delta: 1.0,
            n_constraints: 1,
        };
        assert!((s.eps(6) - 1.0).abs() < 1e-12);
        assert!((Schedule::ExperimentMab.eps(36) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tau_prime_matches_closed_form() {
        // K^0.75 sqrt(6/t) <= delta/2 first at 24 K^1.5 / delta^2
        let s = Schedule::TheoryMain {
            delta: 1.0,
            n_constraints: 1,
        };
        assert_eq!(s.tau_prime(1.0, 10_000), Some(24));
        let s4 = Schedule::TheoryMain {
            delta: 0.5,
            n_constraints: 4,
        };
        // 24 * 8 / 0.25 = 768, up to fp rounding at the exact boundary
        let tau = s4.tau_prime(0.5, 10_000).unwrap();
        assert!((768..=769).contains(&tau), "tau' = {tau}");
        assert!(s4.eps(tau) <= 0.25 && s4.eps(tau - 1) > 0.25);
        assert_eq!(s4.tau_prime(0.5, 100), None);
    }

    #[test]
    fn eps_is_nonincreasing_and_positive() {
        for s in [
            Schedule::TheoryMain {
                delta: 0.3,
                n_constraints: 2,
            },
            Schedule::TheoryLinearCost {
                delta: 0.3,
                d: 4,
                horizon: 1000,
            },
            Schedule::ExperimentMab,
            Schedule::ExperimentWard,
            Schedule::Custom {
                v_coef: 2.0,
                eps_coef: 0.5,
            },
        ] {
            let mut prev = f64::INFINITY;
            for t in 1..200 {
                let e = s.eps(t);
                assert!(e > 0.0 && e <= prev);
                assert!(s.v(t) > 0.0);
                prev = e;
            }
        }
    }

    #[test]
    fn dual_update_examples() {
        let q0 = QueueVector::zeros(1);
        let q = dual_update(&q0, &[-0.5], 0.2);
        assert_eq!(q.values(), &[0.0]);
        let q1 = QueueVector { q: vec![1.0] };
        assert!((dual_update(&q1, &[0.3], 0.1).values()[0] - 1.4).abs() < 1e-15);
        let q2 = QueueVector { q: vec![2.0, 0.0] };
        assert_eq!(dual_update(&q2, &[-1.0, 1.0], 0.0).values(), &[1.0, 1.0]);
    }

    #[test]
    fn queues_stay_nonnegative_and_bounded() {
        // |W| <= 1 bounds each step by 1 + eps in absolute value
        let mut q = QueueVector::zeros(2);
        let s = Schedule::ExperimentWard;
        let mut upper = 0.0;
        for t in 1..500 {
            let eps = s.eps(t);
            let w = [if t % 3 == 0 { 1.0 } else { -1.0 }, -((t % 2) as f64)];
            let next = dual_update(&q, &w, eps);
            for k in 0..2 {
                assert!(next.values()[k] >= 0.0);
                assert!((next.values()[k] - q.values()[k]).abs() <= 1.0 + eps + 1e-12);
            }
            upper += 1.0 + eps;
            assert!(next.values().iter().all(|&x| x <= upper + 1e-9));
            q = next;
        }
    }
}
