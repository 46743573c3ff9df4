//! Subcommand pipelines: evolve the state bundle, compute the requested
//! layer, emit artifacts, and map failures to exit codes.

use std::path::Path;

use serde_json::json;

use decomp_core::myopic::{
    budget_samples, correction_step, correction_terminal, myopic_units, replication_residual_rms,
    BudgetStops,
};
use decomp_core::malliavin::correction_derivative;
use decomp_core::regression::{fit_hedge_coefficients, representation_residual_ratio};
use decomp_core::stats;
use decomp_core::truncation::StateTruncation;
use decomp_core::{decompose, Bundle, DecomposeSpec, Measure};

use crate::config::{load_config, Overrides, Scenario};
use crate::report::{ensure_finite, write_series_csv, write_summary_json, Column};
use crate::verify;
use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Simulate,
    Myopic,
    Hedge,
    Decompose,
    Verify,
}

/// Exit code contract: 0 success, 1 failed verification check,
/// 2 configuration error, 3 numeric failure.
pub fn run(kind: CommandKind, config_path: &Path, ov: &Overrides) -> i32 {
    match execute(kind, config_path, ov) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("{e}");
            match e {
                HarnessError::Config(_) => 2,
                HarnessError::Numeric(_) => 3,
            }
        }
    }
}

fn execute(kind: CommandKind, config_path: &Path, ov: &Overrides) -> Result<bool> {
    let scenario = load_config(config_path)?.resolve(ov)?;
    match kind {
        CommandKind::Simulate => simulate(&scenario).map(|()| true),
        CommandKind::Myopic => myopic(&scenario).map(|()| true),
        CommandKind::Hedge => hedge(&scenario).map(|()| true),
        CommandKind::Decompose => run_decompose(&scenario).map(|()| true),
        CommandKind::Verify => verify::run_suite(&scenario),
    }
}

/// Mean and 5/50/95% quantiles per node, built incrementally.
struct SeriesStats {
    mean: Vec<f64>,
    q05: Vec<f64>,
    q50: Vec<f64>,
    q95: Vec<f64>,
}

impl SeriesStats {
    fn with_capacity(n: usize) -> Self {
        Self {
            mean: Vec::with_capacity(n),
            q05: Vec::with_capacity(n),
            q50: Vec::with_capacity(n),
            q95: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, sample: &[f64]) {
        self.mean.push(stats::mean(sample));
        self.q05.push(stats::quantile(sample, 0.05));
        self.q50.push(stats::quantile(sample, 0.50));
        self.q95.push(stats::quantile(sample, 0.95));
    }

    fn into_columns(self, prefix: &'static str) -> Vec<Column> {
        let names: [&'static str; 4] = match prefix {
            "weight" => ["weight_mean", "weight_q05", "weight_q50", "weight_q95"],
            "myopic_weight" => [
                "myopic_weight_mean",
                "myopic_weight_q05",
                "myopic_weight_q50",
                "myopic_weight_q95",
            ],
            "hedge_weight" => [
                "hedge_weight_mean",
                "hedge_weight_q05",
                "hedge_weight_q50",
                "hedge_weight_q95",
            ],
            "beta" => ["beta_mean", "beta_q05", "beta_q50", "beta_q95"],
            _ => unreachable!("unknown series prefix"),
        };
        vec![
            Column::new(names[0], self.mean),
            Column::new(names[1], self.q05),
            Column::new(names[2], self.q50),
            Column::new(names[3], self.q95),
        ]
    }
}

fn node_times(sc: &Scenario) -> Vec<f64> {
    (0..=sc.grid.steps()).map(|k| sc.grid.node(k)).collect()
}

fn config_echo(sc: &Scenario) -> serde_json::Value {
    serde_json::to_value(&sc.echo).expect("config serializes")
}

fn simulate(sc: &Scenario) -> Result<()> {
    let bundle = Bundle::evolve(&sc.model, sc.grid, sc.paths, sc.seed, Measure::RiskNeutral);
    let n = sc.grid.steps();

    let mut theta_mean = Vec::with_capacity(n + 1);
    let mut theta_sd = Vec::with_capacity(n + 1);
    let mut lnz_mean = Vec::with_capacity(n + 1);
    let mut lnz_sd = Vec::with_capacity(n + 1);
    let mut inv_mean = Vec::with_capacity(n + 1);
    let mut lnz = vec![0.0f64; sc.paths];
    let mut inv = vec![0.0f64; sc.paths];
    let mut gap = 0.0f64;
    let mut gap_node = 0usize;
    for k in 0..=n {
        let th = bundle.theta.row(k);
        theta_mean.push(stats::mean(th));
        theta_sd.push(stats::variance(th).sqrt());
        let z = bundle.density.row(k);
        for j in 0..sc.paths {
            lnz[j] = z[j].ln();
            inv[j] = 1.0 / z[j];
        }
        lnz_mean.push(stats::mean(&lnz));
        lnz_sd.push(stats::variance(&lnz).sqrt());
        let im = stats::mean(&inv);
        inv_mean.push(im);
        // 1/Z̃ is a martingale under the simulated measure with mean 1
        if (im - 1.0).abs() > gap {
            gap = (im - 1.0).abs();
            gap_node = k;
        }
    }
    ensure_finite("inverse-density martingale gap", gap)?;

    if sc.write_csv {
        write_series_csv(
            &sc.out_dir,
            "bundle.csv",
            &[
                Column::new("t", node_times(sc)),
                Column::new("theta_mean", theta_mean),
                Column::new("theta_sd", theta_sd),
                Column::new("log_density_mean", lnz_mean),
                Column::new("log_density_sd", lnz_sd),
                Column::new("inverse_density_mean", inv_mean),
            ],
        )?;
    }
    if sc.write_json {
        write_summary_json(
            &sc.out_dir,
            &json!({
                "command": "simulate",
                "config": config_echo(sc),
                "inada_satisfied": sc.utility.satisfies_inada(),
                "metrics": {
                    "inverse_density_martingale_gap": gap,
                    "inverse_density_martingale_gap_node": gap_node,
                },
                "series": if sc.write_csv { vec!["bundle.csv"] } else { vec![] },
            }),
        )?;
    }
    println!(
        "simulate: {} paths x {} steps, martingale gap {:.3e} -> {}",
        sc.paths,
        n,
        gap,
        sc.out_dir.display()
    );
    Ok(())
}

fn myopic(sc: &Scenario) -> Result<()> {
    let x = sc.initial_wealth;
    let bundle = Bundle::evolve(&sc.model, sc.grid, sc.paths, sc.seed, Measure::RiskNeutral);
    let n = sc.grid.steps();
    let h = sc.grid.h();
    let y = sc.utility.marginal(x);

    let mut weights = SeriesStats::with_capacity(n + 1);
    let mut correction_mean = Vec::with_capacity(n + 1);
    let mut v = vec![0.0f64; sc.paths];
    let mut w = vec![0.0f64; sc.paths];
    for k in 0..=n {
        if k > 0 {
            let z0 = bundle.density.row(k - 1);
            let z1 = bundle.density.row(k);
            let t0 = bundle.theta.row(k - 1);
            let t1 = bundle.theta.row(k);
            for j in 0..sc.paths {
                v[j] += correction_step(&sc.utility, y, h, z0[j], t0[j], z1[j], t1[j]);
            }
        }
        let z = bundle.density.row(k);
        let th = bundle.theta.row(k);
        for j in 0..sc.paths {
            // amount = units * S is spot-free; weight divides by the
            // replicated wealth I(U'(x)Z̃) - V
            let amount = myopic_units(&sc.utility, x, z[j], th[j], sc.sigma, 1.0);
            w[j] = amount / (sc.utility.inverse_marginal(y * z[j]) - v[j]);
        }
        weights.push(&w);
        correction_mean.push(stats::mean(&v));
    }

    let replication_rms =
        ensure_finite("replication rms", replication_residual_rms(&bundle, sc.sigma, sc.spot, &sc.utility, x))?;

    // budget identity E[Z̃(τ)X(τ)] = x holds under the physical measure
    let physical = Bundle::evolve(&sc.model, sc.grid, sc.paths, sc.seed, Measure::Physical);
    let hitting_level = stats::quantile(physical.theta.data(), 0.8);
    let samples = budget_samples(
        &physical,
        sc.sigma,
        sc.spot,
        &sc.utility,
        x,
        BudgetStops { hitting_level },
    );
    let stop_metrics = |xs: &[f64]| -> Result<serde_json::Value> {
        let (mean, se) = stats::mean_and_se(xs);
        ensure_finite("budget mean", mean)?;
        let z = if se > 0.0 { (mean - x) / se } else { 0.0 };
        Ok(json!({"mean": mean, "se": se, "zscore": z}))
    };
    let budget = json!({
        "half_horizon": stop_metrics(&samples.at_half)?,
        "final_horizon": stop_metrics(&samples.at_final)?,
        "hitting": {"level": hitting_level, "stats": stop_metrics(&samples.at_hitting)?},
    });

    if sc.write_csv {
        let mut cols = vec![Column::new("t", node_times(sc))];
        cols.extend(weights.into_columns("weight"));
        cols.push(Column::new("correction_mean", correction_mean));
        write_series_csv(&sc.out_dir, "myopic.csv", &cols)?;
    }
    if sc.write_json {
        write_summary_json(
            &sc.out_dir,
            &json!({
                "command": "myopic",
                "config": config_echo(sc),
                "inada_satisfied": sc.utility.satisfies_inada(),
                "metrics": {
                    "replication_rms": replication_rms,
                    "replication_rms_rel": replication_rms / x,
                    "budget": budget,
                },
                "series": if sc.write_csv { vec!["myopic.csv"] } else { vec![] },
            }),
        )?;
    }
    println!(
        "myopic: replication rms {:.3e} ({:.2}% of x) -> {}",
        replication_rms,
        100.0 * replication_rms / x,
        sc.out_dir.display()
    );
    Ok(())
}

fn hedge(sc: &Scenario) -> Result<()> {
    let x = sc.initial_wealth;
    let bundle = Bundle::evolve(&sc.model, sc.grid, sc.paths, sc.seed, Measure::RiskNeutral);
    let n = sc.grid.steps();

    let beta = {
        let work;
        let fit_bundle = match sc.truncation_multiple {
            Some(m) => {
                work = StateTruncation::at_quantile_multiple(&bundle, m).apply_to_bundle(&bundle);
                &work
            }
            None => &bundle,
        };
        let lambda = correction_derivative(fit_bundle, &sc.model, &sc.utility, x);
        fit_hedge_coefficients(fit_bundle, &lambda, &sc.utility, x, &sc.regression)?
    };

    let vt = correction_terminal(&bundle, &sc.utility, x);
    let (correction_mean, correction_se) = stats::mean_and_se(&vt);
    let ratio = ensure_finite(
        "representation residual ratio",
        representation_residual_ratio(&bundle, &beta, &vt),
    )?;

    let mut series = SeriesStats::with_capacity(n + 1);
    for k in 0..=n {
        series.push(beta.row(k));
    }
    let amount_mean: Vec<f64> = series.mean.iter().map(|&b| b / sc.sigma).collect();

    if sc.write_csv {
        let mut cols = vec![Column::new("t", node_times(sc))];
        cols.extend(series.into_columns("beta"));
        cols.push(Column::new("hedge_amount_mean", amount_mean));
        write_series_csv(&sc.out_dir, "hedge.csv", &cols)?;
    }
    if sc.write_json {
        write_summary_json(
            &sc.out_dir,
            &json!({
                "command": "hedge",
                "config": config_echo(sc),
                "inada_satisfied": sc.utility.satisfies_inada(),
                "metrics": {
                    "correction_mean": correction_mean,
                    "correction_se": correction_se,
                    "representation_residual_ratio": ratio,
                },
                "series": if sc.write_csv { vec!["hedge.csv"] } else { vec![] },
            }),
        )?;
    }
    println!(
        "hedge: correction {:.6} +/- {:.1e}, residual ratio {:.3e} -> {}",
        correction_mean,
        correction_se,
        ratio,
        sc.out_dir.display()
    );
    Ok(())
}

pub(crate) fn decompose_scenario(sc: &Scenario, bundle: &Bundle) -> Result<decomp_core::Decomposition> {
    let mut spec = DecomposeSpec::new(sc.initial_wealth, sc.sigma, sc.spot);
    spec.regression = sc.regression;
    spec.truncation = sc
        .truncation_multiple
        .map(|m| StateTruncation::at_quantile_multiple(bundle, m));
    Ok(decompose(bundle, &sc.model, &sc.utility, &spec)?)
}

pub(crate) fn run_decompose(sc: &Scenario) -> Result<()> {
    let x = sc.initial_wealth;
    let bundle = Bundle::evolve(&sc.model, sc.grid, sc.paths, sc.seed, Measure::RiskNeutral);
    let d = decompose_scenario(sc, &bundle)?;
    let n = sc.grid.steps();
    let h = sc.grid.h();
    ensure_finite("split point", d.z_star)?;
    let rel_rms = ensure_finite("terminal mismatch", d.terminal_error_rel_rms())?;
    ensure_finite("representation residual ratio", d.representation_residual_ratio)?;

    // replay the combined roll to report node-wise weights against wealth
    let y = sc.utility.marginal(d.z_star);
    let mut s = vec![sc.spot; sc.paths];
    let mut wealth = vec![x; sc.paths];
    let mut v = vec![0.0f64; sc.paths];
    let mut myo_w = vec![0.0f64; sc.paths];
    let mut hed_w = vec![0.0f64; sc.paths];
    let mut myopic_weights = SeriesStats::with_capacity(n + 1);
    let mut hedge_weights = SeriesStats::with_capacity(n + 1);
    let mut correction_mean = Vec::with_capacity(n + 1);
    let mut beta_mean = Vec::with_capacity(n + 1);
    let mut wealth_mean = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if k > 0 {
            let z0 = bundle.density.row(k - 1);
            let z1 = bundle.density.row(k);
            let t0 = bundle.theta.row(k - 1);
            let t1 = bundle.theta.row(k);
            for j in 0..sc.paths {
                v[j] += correction_step(&sc.utility, y, h, z0[j], t0[j], z1[j], t1[j]);
            }
        }
        let z = bundle.density.row(k);
        let th = bundle.theta.row(k);
        let b = d.hedge_coefficients.row(k);
        for j in 0..sc.paths {
            let myo_amount = myopic_units(&sc.utility, d.z_star, z[j], th[j], sc.sigma, s[j]) * s[j];
            let hed_amount = b[j] / sc.sigma;
            myo_w[j] = myo_amount / wealth[j];
            hed_w[j] = hed_amount / wealth[j];
        }
        myopic_weights.push(&myo_w);
        hedge_weights.push(&hed_w);
        correction_mean.push(stats::mean(&v));
        beta_mean.push(stats::mean(b));
        wealth_mean.push(stats::mean(&wealth));
        if k < n {
            let dwt = bundle.dwt.row(k);
            for j in 0..sc.paths {
                let units = myopic_units(&sc.utility, d.z_star, z[j], th[j], sc.sigma, s[j])
                    + b[j] / (sc.sigma * s[j]);
                let s_next = s[j] * (sc.sigma * dwt[j] - 0.5 * sc.sigma * sc.sigma * h).exp();
                wealth[j] += units * (s_next - s[j]);
                s[j] = s_next;
            }
        }
    }

    if sc.write_csv {
        let mut cols = vec![Column::new("t", node_times(sc))];
        cols.extend(myopic_weights.into_columns("myopic_weight"));
        cols.extend(hedge_weights.into_columns("hedge_weight"));
        cols.push(Column::new("correction_mean", correction_mean));
        cols.push(Column::new("beta_mean", beta_mean));
        cols.push(Column::new("wealth_mean", wealth_mean));
        write_series_csv(&sc.out_dir, "decompose.csv", &cols)?;
    }
    if sc.write_json {
        write_summary_json(
            &sc.out_dir,
            &json!({
                "command": "decompose",
                "config": config_echo(sc),
                "inada_satisfied": sc.utility.satisfies_inada(),
                "metrics": {
                    "x": x,
                    "x_star": d.z_star,
                    "split_iterations": d.split_iterations,
                    "correction_mean": d.correction_mean,
                    "correction_se": d.correction_se,
                    "initial_myopic_amount": d.initial_myopic_amount,
                    "initial_hedge_amount": d.initial_hedge_amount,
                    "representation_residual_ratio": d.representation_residual_ratio,
                    "terminal_mismatch_rel_rms": rel_rms,
                },
                "series": if sc.write_csv { vec!["decompose.csv"] } else { vec![] },
            }),
        )?;
    }
    println!(
        "decompose: x_star {:.6}, correction {:.6} +/- {:.1e}, residual ratio {:.3e}, terminal rel rms {:.3e} -> {}",
        d.z_star,
        d.correction_mean,
        d.correction_se,
        d.representation_residual_ratio,
        rel_rms,
        sc.out_dir.display()
    );
    Ok(())
}
