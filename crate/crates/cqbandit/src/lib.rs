//! Simulation library for stochastic linear bandits under anytime
//! cumulative cost constraints.
//!
//! The centerpiece is a pessimistic-optimistic primal-dual policy: the
//! primal side scores actions with LinUCB confidence-ellipsoid reward
//! estimates, while the dual side keeps one virtual queue per constraint
//! whose scaled value `Q/V_t` acts as a dynamic Lagrange multiplier.
//! A variant handles costs that are linearly parameterized and revealed
//! only after acting, by substituting a clipped pessimistic cost estimate
//! for the unobserved cost.
//!
//! Around the policy sit:
//!
//! - [`instances`]: problem definitions (contexts, features, reward and
//!   cost models) with seeded, counter-addressed sampling,
//! - [`oracle`]: exact LP solutions for the fluid baseline, its tightened
//!   version, and the Slater margin, backed by a dense two-phase simplex
//!   and an independent vertex-enumeration cross-check,
//! - [`metrics`]: pseudo-regret and violation curves, pathwise violation
//!   frequencies, queue diagnostics, and log-log slope fits,
//! - [`cli`] / [`config`]: a file-driven experiment harness emitting CSV,
//! - [`verify`]: the acceptance battery behind `cqbandit verify`.
//!
//! All randomness flows from explicit seeds through counter-based streams
//! ([`rng`]), so every run is bit-reproducible regardless of thread
//! scheduling.

pub mod algorithm;
pub mod cli;
pub mod confidence;
pub mod config;
pub mod dual;
pub mod instances;
mod linalg;
pub mod metrics;
pub mod oracle;
pub mod rng;
pub mod verify;
