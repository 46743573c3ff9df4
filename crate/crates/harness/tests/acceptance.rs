//! Acceptance gate: one test per verification check, each printing the
//! check's measured line. Seeds are fixed so the numbers below reproduce
//! exactly.

use decomp_harness::verify;

const SEED: u64 = 42;

fn assert_check(c: verify::CheckResult) {
    println!("{}", c.line());
    assert!(c.passed, "{}: {}", c.name, c.detail);
}

#[test]
fn replication_residual_converges_under_refinement() {
    assert_check(verify::replication_residual_ladder(SEED));
}

#[test]
fn log_utility_degenerates_to_the_fixed_mix() {
    assert_check(verify::log_degeneracy(SEED));
}

#[test]
fn budget_identity_holds_at_three_stopping_times() {
    assert_check(verify::budget_martingale(SEED));
}

#[test]
fn representation_residual_is_small_and_matches_the_oracle() {
    assert_check(verify::representation_residual(SEED));
}

#[test]
fn terminal_wealth_mismatch_is_small_and_shrinks_under_refinement() {
    assert_check(verify::terminal_optimality(SEED));
}

#[test]
fn split_point_agrees_with_the_closed_form() {
    assert_check(verify::wealth_split_root(SEED));
}

#[test]
fn state_and_correction_derivatives_match_their_oracles() {
    assert_check(verify::derivative_oracles(SEED));
}

#[test]
fn variational_kernel_and_density_flow_behave() {
    assert_check(verify::variational_flow(SEED));
}

#[test]
fn truncation_levels_leave_outputs_stable() {
    assert_check(verify::truncation_ladder(SEED));
}

/// Running the whole suite twice with the same seed and output directory
/// must reproduce its CSV and JSON artifacts byte for byte and fit the
/// runtime budget. This is the only test that exercises `run_all`; pass or
/// fail, the individual check verdicts are already covered above.
#[test]
fn suite_is_deterministic_and_fits_the_runtime_budget() {
    let dir = std::env::temp_dir().join(format!("decomp-acceptance-{}", std::process::id()));
    let echo = serde_json::json!({"suite": "acceptance"});
    let first = verify::run_all(SEED, &dir, echo.clone()).expect("suite runs");
    let csv_first = std::fs::read(dir.join("verify.csv")).expect("verify.csv written");
    let json_first = std::fs::read(dir.join("summary.json")).expect("summary.json written");
    let second = verify::run_all(SEED, &dir, echo).expect("suite reruns");
    let csv_second = std::fs::read(dir.join("verify.csv")).expect("verify.csv rewritten");
    let json_second = std::fs::read(dir.join("summary.json")).expect("summary.json rewritten");
    std::fs::remove_dir_all(&dir).ok();

    assert_eq!(csv_first, csv_second, "verify.csv changed between identical runs");
    assert_eq!(json_first, json_second, "summary.json changed between identical runs");
    for report in [&first, &second] {
        assert!(
            report.elapsed_s <= verify::RUNTIME_BUDGET_S,
            "suite took {:.0}s with a budget of {:.0}s",
            report.elapsed_s,
            verify::RUNTIME_BUDGET_S
        );
    }
    let failed = first.checks.iter().filter(|c| !c.passed).count();
    println!("suite verdicts: {} of {} checks passed", first.checks.len() - failed, first.checks.len());
}
