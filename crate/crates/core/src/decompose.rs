//! End-to-end decomposition of the optimal portfolio.
//!
//! Given an evolved risk-neutral bundle, the pipeline
//!   1. estimates the correction curve and solves for the split point z*,
//!   2. computes the pathwise correction derivative λ at z*,
//!   3. conditions λ on the Markov state (ln Z̃, θ̃) to get the hedge
//!      coefficients β̂,
//!   4. rolls the combined wealth x → X(T) holding the myopic units for
//!      wealth z* plus the hedge units β̂/(σS),
//! and reports the terminal wealth against the optimality target
//! I(U′(z*)Z̃(T)) on the same paths. Stage 2 and 3 optionally run on a copy
//! of the bundle with tail-truncated θ̃ and ln Z̃; the target and the wealth
//! roll always use the raw paths, so a truncation ladder exposes the bias the
//! cap introduces.

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::malliavin::correction_derivative;
use crate::model::RiskPriceModel;
use crate::myopic::{correction_terminal, myopic_units};
use crate::paths::PathMatrix;
use crate::regression::{fit_hedge_coefficients, representation_residual_ratio, RegressionSpec};
use crate::split::{solve_split, CorrectionCurve};
use crate::stats;
use crate::truncation::StateTruncation;
use crate::utility::{CorrectionShape, Utility};

#[derive(Debug, Clone)]
pub struct DecomposeSpec {
    pub initial_wealth: f64,
    /// Asset volatility of the single hedging asset.
    pub sigma: f64,
    pub spot: f64,
    pub regression: RegressionSpec,
    /// State truncation for the derivative and conditioning stages.
    pub truncation: Option<StateTruncation>,
    /// Split-root tolerance relative to the initial wealth.
    pub split_tol_rel: f64,
}

impl DecomposeSpec {
    pub fn new(initial_wealth: f64, sigma: f64, spot: f64) -> Self {
        Self {
            initial_wealth,
            sigma,
            spot,
            regression: RegressionSpec::default(),
            truncation: None,
            split_tol_rel: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial_wealth > 0.0) || !self.initial_wealth.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "initial wealth must be positive, got {}",
                self.initial_wealth
            )));
        }
        if !(self.sigma > 0.0) || !(self.spot > 0.0) {
            return Err(Error::InvalidParameter(
                "volatility and spot must be positive".into(),
            ));
        }
        if !(self.split_tol_rel > 0.0) {
            return Err(Error::InvalidParameter("split tolerance must be positive".into()));
        }
        self.regression.validate()
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Wealth funding the myopic leg; x − z* funds the hedge.
    pub z_star: f64,
    pub split_iterations: u32,
    /// Ẽ V_{z*}(T) and its standard error on these paths.
    pub correction_mean: f64,
    pub correction_se: f64,
    /// Dollar positions at t = 0.
    pub initial_myopic_amount: f64,
    pub initial_hedge_amount: f64,
    /// Var(V_T − mean − Σ β̂ ΔW̃) / Var(V_T).
    pub representation_residual_ratio: f64,
    /// β̂ at every node and path, the hedge position in dollars times σ.
    pub hedge_coefficients: PathMatrix,
    /// Combined terminal wealth per path.
    pub terminal_wealth: Vec<f64>,
    /// I(U′(z*)Z̃(T)) per path.
    pub terminal_target: Vec<f64>,
}

impl Decomposition {
    /// RMS of X(T) − I(U′(z*)Z̃(T)), relative to the RMS of the target.
    pub fn terminal_error_rel_rms(&self) -> f64 {
        let diffs: Vec<f64> = self
            .terminal_wealth
            .iter()
            .zip(&self.terminal_target)
            .map(|(&w, &t)| w - t)
            .collect();
        stats::rms(&diffs) / stats::rms(&self.terminal_target)
    }
}

/// Run the full pipeline on an evolved risk-neutral bundle.
pub fn decompose(
    bundle: &Bundle,
    model: &RiskPriceModel,
    utility: &Utility,
    spec: &DecomposeSpec,
) -> Result<Decomposition> {
    spec.validate()?;
    utility.validate()?;
    model.validate()?;

    let n = bundle.grid.steps();
    let h = bundle.grid.h();
    let npaths = bundle.npaths();
    let x = spec.initial_wealth;

    let shape = utility.correction_shape();
    let v_ref = match shape {
        CorrectionShape::Zero => vec![0.0; npaths],
        _ => correction_terminal(bundle, utility, 1.0),
    };
    let curve = CorrectionCurve::from_reference_samples(&v_ref, shape);
    let split = solve_split(&curve, x, spec.split_tol_rel * x)?;
    let z_star = split.z_star;

    // V_{z*}(T) per path, exact rescaling of the reference samples
    let v_terminal: Vec<f64> = match shape {
        CorrectionShape::Zero => v_ref,
        CorrectionShape::LinearInWealth => v_ref.iter().map(|&v| v * z_star).collect(),
        CorrectionShape::ConstantInWealth => v_ref,
    };
    let (correction_mean, correction_se) = stats::mean_and_se(&v_terminal);

    let beta = {
        let work;
        let work_bundle = match &spec.truncation {
            Some(tr) => {
                work = tr.apply_to_bundle(bundle);
                &work
            }
            None => bundle,
        };
        let lambda = correction_derivative(work_bundle, model, utility, z_star);
        fit_hedge_coefficients(work_bundle, &lambda, utility, z_star, &spec.regression)?
    };
    let ratio = representation_residual_ratio(bundle, &beta, &v_terminal);

    // combined wealth roll on the raw paths
    let sigma = spec.sigma;
    let mut s = vec![spec.spot; npaths];
    let mut wealth = vec![x; npaths];
    for k in 0..n {
        let z_row = bundle.density.row(k);
        let th_row = bundle.theta.row(k);
        let dwt = bundle.dwt.row(k);
        let b_row = beta.row(k);
        for j in 0..npaths {
            let units = myopic_units(utility, z_star, z_row[j], th_row[j], sigma, s[j])
                + b_row[j] / (sigma * s[j]);
            let s_next = s[j] * (sigma * dwt[j] - 0.5 * sigma * sigma * h).exp();
            wealth[j] += units * (s_next - s[j]);
            s[j] = s_next;
        }
    }

    let y = utility.marginal(z_star);
    let terminal_target: Vec<f64> = bundle
        .density
        .row(n)
        .iter()
        .map(|&zv| utility.inverse_marginal(y * zv))
        .collect();

    let theta0 = bundle.theta.at(0, 0);
    let z0 = bundle.density.at(0, 0);
    let initial_myopic_amount =
        myopic_units(utility, z_star, z0, theta0, sigma, spec.spot) * spec.spot;
    let initial_hedge_amount = stats::mean(beta.row(0)) / sigma;

    Ok(Decomposition {
        z_star,
        split_iterations: split.iterations,
        correction_mean,
        correction_se,
        initial_myopic_amount,
        initial_hedge_amount,
        representation_residual_ratio: ratio,
        hedge_coefficients: beta,
        terminal_wealth: wealth,
        terminal_target,
    })
}
