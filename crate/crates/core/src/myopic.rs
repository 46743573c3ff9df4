//! Myopic portfolio, correction process, and their exact identities.
//!
//! The myopic strategy holds
//!     π̃(t) = −U′(x) I′(U′(x)Z̃(t)) Z̃(t) θ̃(t) / σ      (dollar position)
//! and finances, up to the discretization error of the wealth roll,
//!     X^{x,π̃}(t) = I(U′(x)Z̃(t)) − V_x(t),
//! with the correction V_x(t) = ∫₀ᵗ F(U′(x)Z̃)θ̃² du accumulated by the
//! trapezoid rule. Both the replication residual of that identity and the
//! budget martingale E[Z̃(τ)X^{x,π̃}(τ)] = x at stopping times are measured
//! here; they back the convergence and stopping-time acceptance checks.

use crate::bundle::Bundle;
use crate::utility::Utility;

/// Dollar position of the myopic portfolio at one node, divided by S to give
/// units of the asset.
#[inline]
pub fn myopic_units(utility: &Utility, x: f64, z: f64, theta: f64, sigma: f64, s: f64) -> f64 {
    let y = utility.marginal(x);
    -(y * utility.inverse_marginal_deriv(y * z) * z * theta) / (sigma * s)
}

/// Trapezoid accumulation of V across one step.
#[inline]
pub fn correction_step(utility: &Utility, y: f64, h: f64, z0: f64, th0: f64, z1: f64, th1: f64) -> f64 {
    let f0 = utility.correction_density(y * z0) * th0 * th0;
    let f1 = utility.correction_density(y * z1) * th1 * th1;
    0.5 * h * (f0 + f1)
}

/// Terminal correction V_x(T) per path.
pub fn correction_terminal(bundle: &Bundle, utility: &Utility, x: f64) -> Vec<f64> {
    let n = bundle.grid.steps();
    let h = bundle.grid.h();
    let y = utility.marginal(x);
    let npaths = bundle.npaths();
    let mut v = vec![0.0f64; npaths];
    for k in 0..n {
        let z0 = bundle.density.row(k);
        let z1 = bundle.density.row(k + 1);
        let t0 = bundle.theta.row(k);
        let t1 = bundle.theta.row(k + 1);
        for j in 0..npaths {
            v[j] += correction_step(utility, y, h, z0[j], t0[j], z1[j], t1[j]);
        }
    }
    v
}

/// Roll the myopic wealth and report the RMS of X + V − I(U′(x)Z̃) over all
/// nodes and paths. The residual is zero at t = 0 and grows like h^{1/2}
/// (Euler self-financing against log-Euler assets).
pub fn replication_residual_rms(
    bundle: &Bundle,
    sigma: f64,
    s0: f64,
    utility: &Utility,
    x: f64,
) -> f64 {
    let n = bundle.grid.steps();
    let h = bundle.grid.h();
    let y = utility.marginal(x);
    let npaths = bundle.npaths();

    let mut s = vec![s0; npaths];
    let mut wealth = vec![x; npaths];
    let mut v = vec![0.0f64; npaths];
    let mut sum_sq = 0.0f64;
    // node 0 residual: x − I(U′(x)) = 0 up to roundoff
    for j in 0..npaths {
        let r = wealth[j] + v[j] - utility.inverse_marginal(y * bundle.density.at(0, j));
        sum_sq += r * r;
    }
    for k in 0..n {
        let z0 = bundle.density.row(k);
        let z1 = bundle.density.row(k + 1);
        let t0 = bundle.theta.row(k);
        let t1 = bundle.theta.row(k + 1);
        let dwt = bundle.dwt.row(k);
        for j in 0..npaths {
            let units = myopic_units(utility, x, z0[j], t0[j], sigma, s[j]);
            let s_next = s[j] * (sigma * dwt[j] - 0.5 * sigma * sigma * h).exp();
            wealth[j] += units * (s_next - s[j]);
            s[j] = s_next;
            v[j] += correction_step(utility, y, h, z0[j], t0[j], z1[j], t1[j]);
            let r = wealth[j] + v[j] - utility.inverse_marginal(y * z1[j]);
            sum_sq += r * r;
        }
    }
    (sum_sq / ((n + 1) as f64 * npaths as f64)).sqrt()
}

/// Stopping-time grid indices for the budget check: half horizon, full
/// horizon, and the first node where θ̃ reaches `hitting_level` (capped at T).
#[derive(Debug, Clone, Copy)]
pub struct BudgetStops {
    pub hitting_level: f64,
}

#[derive(Debug, Clone)]
pub struct BudgetSamples {
    /// Z̃(τ)X(τ) per path at τ = T/2.
    pub at_half: Vec<f64>,
    /// At τ = T.
    pub at_final: Vec<f64>,
    /// At the capped hitting time.
    pub at_hitting: Vec<f64>,
}

/// Z̃(τ)X^{x,π̃}(τ) per path at the three stopping times. The identity
/// E[Z̃(τ)X(τ)] = x holds for any stopping time; the hitting time exercises
/// one that depends on the whole θ̃ history.
pub fn budget_samples(
    bundle: &Bundle,
    sigma: f64,
    s0: f64,
    utility: &Utility,
    x: f64,
    stops: BudgetStops,
) -> BudgetSamples {
    let n = bundle.grid.steps();
    let h = bundle.grid.h();
    let npaths = bundle.npaths();
    let half = n / 2;

    let mut s = vec![s0; npaths];
    let mut wealth = vec![x; npaths];
    let mut hit = vec![false; npaths];
    let mut at_half = vec![0.0f64; npaths];
    let mut at_hitting = vec![0.0f64; npaths];

    for j in 0..npaths {
        if bundle.theta.at(0, j) >= stops.hitting_level {
            hit[j] = true;
            at_hitting[j] = x; // Z̃(0) = 1
        }
    }
    for k in 0..n {
        let z0 = bundle.density.row(k);
        let t0 = bundle.theta.row(k);
        let dwt = bundle.dwt.row(k);
        for j in 0..npaths {
            let units = myopic_units(utility, x, z0[j], t0[j], sigma, s[j]);
            let s_next = s[j] * (sigma * dwt[j] - 0.5 * sigma * sigma * h).exp();
            wealth[j] += units * (s_next - s[j]);
            s[j] = s_next;
        }
        let z1 = bundle.density.row(k + 1);
        let t1 = bundle.theta.row(k + 1);
        for j in 0..npaths {
            if k + 1 == half {
                at_half[j] = z1[j] * wealth[j];
            }
            if !hit[j] && t1[j] >= stops.hitting_level {
                hit[j] = true;
                at_hitting[j] = z1[j] * wealth[j];
            }
        }
    }
    let z_last = bundle.density.row(n);
    let at_final: Vec<f64> = (0..npaths).map(|j| z_last[j] * wealth[j]).collect();
    for j in 0..npaths {
        if !hit[j] {
            at_hitting[j] = at_final[j];
        }
    }
    BudgetSamples { at_half, at_final, at_hitting }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::Measure;
    use crate::grid::TimeGrid;
    use crate::model::RiskPriceModel;
    use crate::stats;

    #[test]
    fn log_weights_equal_fixed_mix_of_replication_wealth() {
        // Log utility: the dollar position is θ/σ times the replication
        // wealth x/Z̃(t), at every node and on every path.
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let model = RiskPriceModel::OrnsteinUhlenbeck {
            alpha: 0.5,
            beta: 1.0,
            vol: 0.3,
            initial: 0.4,
        };
        let b = Bundle::evolve(&model, grid, 50, 3, Measure::Physical);
        let u = Utility::Log;
        let (sigma, x) = (0.2, 1.7);
        for k in 0..=64 {
            for j in 0..50 {
                let z = b.density.at(k, j);
                let th = b.theta.at(k, j);
                let s = 1.0 + 0.01 * j as f64; // weight must not depend on S
                let amount = myopic_units(&u, x, z, th, sigma, s) * s;
                let weight = amount / (x / z);
                assert!((weight - th / sigma).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn residual_decays_with_the_step() {
        let model = RiskPriceModel::Constant { theta: 0.4 };
        let u = Utility::Power { p: 0.5 };
        let mut rms_by_step = Vec::new();
        for steps in [32usize, 64, 128] {
            let grid = TimeGrid::new(1.0, steps).unwrap();
            let b = Bundle::evolve(&model, grid, 2_000, 17, Measure::Physical);
            rms_by_step.push(replication_residual_rms(&b, 0.2, 1.0, &u, 1.0));
        }
        // order 1/2: each halving of h shrinks the rms by about sqrt(2)
        assert!(rms_by_step[0] / rms_by_step[1] > 1.25);
        assert!(rms_by_step[1] / rms_by_step[2] > 1.25);
        assert!(rms_by_step[2] < 0.035, "rms {}", rms_by_step[2]);
    }

    #[test]
    fn budget_holds_at_stopping_times() {
        let grid = TimeGrid::new(1.0, 128).unwrap();
        let model = RiskPriceModel::OrnsteinUhlenbeck {
            alpha: 0.5,
            beta: 1.0,
            vol: 0.3,
            initial: 0.2,
        };
        let u = Utility::Power { p: 0.5 };
        let b = Bundle::evolve(&model, grid, 20_000, 29, Measure::Physical);
        let samples = budget_samples(&b, 0.2, 1.0, &u, 1.0, BudgetStops { hitting_level: 0.6 });
        for vals in [&samples.at_half, &samples.at_final, &samples.at_hitting] {
            let (mean, se) = stats::mean_and_se(vals);
            // 4 SE plus an O(h) slack for the discrete roll
            assert!(
                (mean - 1.0).abs() < 4.0 * se + 2e-3,
                "budget mean {mean}, se {se}"
            );
        }
    }
}
