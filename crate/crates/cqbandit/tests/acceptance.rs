//! Acceptance battery at reference parameters: one test per criterion,
//! each printing a single pass/fail line with the measured values.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see every
//! line, or `cqbandit verify full` for the same battery in one process.

use cqbandit::verify::{self, CriterionResult, Suite};

fn report(result: CriterionResult) {
    println!(
        "acceptance criterion {:2} {}  {} - {}",
        result.id,
        if result.pass { "PASS" } else { "FAIL" },
        result.name,
        result.detail
    );
    assert!(
        result.pass,
        "criterion {} failed: {}",
        result.id, result.detail
    );
}

#[test]
fn criterion_01_regret_slope() {
    report(verify::criterion_1(Suite::Full));
}

#[test]
fn criterion_02_zero_violation_after_finite_round() {
    report(verify::criterion_2(Suite::Full));
}

#[test]
fn criterion_03_pathwise_tail_decay() {
    report(verify::criterion_3(Suite::Full));
}

#[test]
fn criterion_04_queue_boundedness() {
    report(verify::criterion_4(Suite::Full));
}

#[test]
fn criterion_05_confidence_coverage() {
    report(verify::criterion_5(Suite::Full));
}

#[test]
fn criterion_06_lp_oracle_equivalence() {
    report(verify::criterion_6(Suite::Full));
}

#[test]
fn criterion_07_tightening_gap() {
    report(verify::criterion_7(Suite::Full));
}

#[test]
fn criterion_08_policy_upper_bound() {
    report(verify::criterion_8(Suite::Full));
}

#[test]
fn criterion_09_linear_cost_variant() {
    report(verify::criterion_9(Suite::Full));
}

#[test]
fn criterion_10_determinism() {
    report(verify::criterion_10(Suite::Full));
}
