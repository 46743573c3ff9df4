//! Pathwise arbiter for the correction derivative: bump one risk-neutral
//! increment, re-evolve, and central-difference the terminal correction. The
//! comparison is pathwise, so no Monte Carlo noise enters; agreement is up to
//! the O(h) gap between the discrete flow and the bumped scheme.

use decomp_core::bundle::{Bundle, Measure};
use decomp_core::grid::TimeGrid;
use decomp_core::malliavin::correction_derivative;
use decomp_core::model::RiskPriceModel;
use decomp_core::myopic::correction_terminal;
use decomp_core::paths::brownian_increments;
use decomp_core::utility::Utility;

fn bump_ratios(
    model: &RiskPriceModel,
    utility: &Utility,
    x: f64,
    steps: usize,
    npaths: usize,
    node: usize,
) -> Vec<f64> {
    let grid = TimeGrid::new(1.0, steps).unwrap();
    let noise = brownian_increments(5, npaths, steps, grid.h());
    let bundle = Bundle::evolve_from(model, grid, noise.clone(), Measure::RiskNeutral);
    let lambda = correction_derivative(&bundle, model, utility, x);

    let delta = 1e-6;
    let shifted = |sign: f64| {
        let mut n = noise.clone();
        for j in 0..npaths {
            let v = n.at(node, j) + sign * delta;
            n.set(node, j, v);
        }
        let b = Bundle::evolve_from(model, grid, n, Measure::RiskNeutral);
        correction_terminal(&b, utility, x)
    };
    let up = shifted(1.0);
    let dn = shifted(-1.0);

    let mut ratios = Vec::new();
    for j in 0..npaths {
        let fd = (up[j] - dn[j]) / (2.0 * delta);
        if fd.abs() > 1e-4 {
            ratios.push(lambda.at(node, j) / fd);
        }
    }
    assert!(ratios.len() > npaths / 2, "too few usable paths: {}", ratios.len());
    ratios
}

fn assert_ratios_near_one(label: &str, ratios: &[f64], mean_tol: f64, sd_tol: f64) {
    let mean = decomp_core::stats::mean(ratios);
    let sd = decomp_core::stats::variance(ratios).sqrt();
    println!("{label}: ratio mean {mean}, sd {sd}, n {}", ratios.len());
    assert!((mean - 1.0).abs() < mean_tol, "{label}: mean {mean}");
    assert!(sd < sd_tol, "{label}: sd {sd}");
}

// The flow gap is O(h) relative to the remaining horizon, so the tolerance
// tightens with the number of steps left of the anchor.
fn mean_tol(steps: usize, node: usize) -> f64 {
    1.5 / (steps - node) as f64
}

#[test]
fn bump_matches_derivative_const_power() {
    let model = RiskPriceModel::Constant { theta: 0.4 };
    let u = Utility::Power { p: 0.5 };
    for node in [0usize, 32, 48] {
        let r = bump_ratios(&model, &u, 1.0, 64, 200, node);
        assert_ratios_near_one(&format!("const power node {node}"), &r, mean_tol(64, node), 0.03);
    }
}

#[test]
fn bump_matches_derivative_ou_power() {
    let model =
        RiskPriceModel::OrnsteinUhlenbeck { alpha: 0.5, beta: 1.0, vol: 0.3, initial: 0.2 };
    let u = Utility::Power { p: 0.5 };
    for node in [0usize, 32, 48] {
        let r = bump_ratios(&model, &u, 1.0, 64, 200, node);
        assert_ratios_near_one(&format!("ou power node {node}"), &r, mean_tol(64, node), 0.12);
    }
}

#[test]
fn bump_matches_derivative_ou_exponential() {
    // F′ ≡ 0 here, so only the kernel term of the derivative is exercised
    let model =
        RiskPriceModel::OrnsteinUhlenbeck { alpha: 0.5, beta: 1.0, vol: 0.3, initial: 0.2 };
    let u = Utility::Exponential { a: 1.0 };
    for node in [0usize, 32, 48] {
        let r = bump_ratios(&model, &u, 1.0, 64, 200, node);
        assert_ratios_near_one(&format!("ou exponential node {node}"), &r, mean_tol(64, node), 0.05);
    }
}

#[test]
fn constant_state_exponential_derivative_vanishes() {
    // deterministic θ̃ and F′ = 0 leave nothing for the derivative to see
    let model = RiskPriceModel::Constant { theta: 0.4 };
    let u = Utility::Exponential { a: 1.0 };
    let grid = TimeGrid::new(1.0, 32).unwrap();
    let bundle = Bundle::evolve(&model, grid, 20, 9, Measure::RiskNeutral);
    let lambda = correction_derivative(&bundle, &model, &u, 1.0);
    assert!(lambda.data().iter().all(|&v| v == 0.0));
}

#[test]
fn bump_gap_shrinks_with_the_step() {
    // the ratio deviation is the O(h) flow gap: quarter the step, quarter it
    let model =
        RiskPriceModel::OrnsteinUhlenbeck { alpha: 0.5, beta: 1.0, vol: 0.3, initial: 0.2 };
    let u = Utility::Power { p: 0.5 };
    let dev = |steps: usize| {
        let r = bump_ratios(&model, &u, 1.0, steps, 100, steps / 2);
        (decomp_core::stats::mean(&r) - 1.0).abs()
    };
    let coarse = dev(32);
    let fine = dev(128);
    println!("mean deviation: steps 32 {coarse}, steps 128 {fine}");
    assert!(fine < 0.75 * coarse);
}
