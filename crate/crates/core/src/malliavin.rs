//! Pathwise derivative of the terminal correction.
//!
//! λ(t_m) is the derivative of V_x(T) = ∫ F(U′(x)Z̃)θ̃² du with respect to the
//! risk-neutral increment at t_m, the quantity whose conditional expectation
//! Ẽ[λ(t)|F_t] is the hedge integrand of the martingale representation
//! V_x(T) = Ẽ V_x(T) + ∫ β dW̃. Differentiating the integrand through the
//! state flow gives, with c₁ = U′(x)F′(U′(x)Z̃)θ̃² and c₂ = 2F(U′(x)Z̃)θ̃,
//!
//! ```text
//! λ(t_m) = −Z̃_m θ̃_m ∫ₜᴹᵀ c₁(u) Φ^{1,1}(u, t_m) du
//!          + ∫ₜᴹᵀ [c₁(u) Φ^{1,2}(u, t_m) + c₂(u) k₂(u; t_m)] du
//! ```
//!
//! where Φ^{1,1} is the Z̃-direction flow, Φ^{1,2} the cross response of Z̃ to
//! a θ̃ kick, and k₂ the θ̃ response kernel. The direct solver integrates the
//! flow recursions anchor by anchor (O(N²) per path); the fast solver turns
//! the same recursions into suffix sums (O(N) per path), exact to roundoff
//! against the direct one because Φ^{1,1}(k, m) = E_k/E_m and
//! k̂₂(d) = v·ρ^d hold at scheme level. Central-difference bumping of the
//! increments reproduces λ pathwise, which pins the whole construction.

use crate::bundle::Bundle;
use crate::flow::{flow_multiplier, kernel_decay_factor, kernel_response_series};
use crate::model::RiskPriceModel;
use crate::paths::PathMatrix;
use crate::utility::Utility;

/// λ at every node and path, suffix-sum form.
pub fn correction_derivative(
    bundle: &Bundle,
    model: &RiskPriceModel,
    utility: &Utility,
    x: f64,
) -> PathMatrix {
    let n = bundle.grid.steps();
    let h = bundle.grid.h();
    let npaths = bundle.npaths();
    let y = utility.marginal(x);

    // Forward pass: flow E and, for the kernel term, the partial sums
    // A_u = Σ_{k<u} Z̃_k ρ^k (2θ̃_k h − ΔW̃_k) / E_{k+1}.
    let mut e_flow = PathMatrix::zeros(n + 1, npaths);
    e_flow.row_mut(0).fill(1.0);
    let stochastic = model.is_stochastic();
    let rho = kernel_decay_factor(model, h);
    let vol = match *model {
        RiskPriceModel::OrnsteinUhlenbeck { vol, .. } => vol,
        RiskPriceModel::Constant { .. } => 0.0,
    };
    let mut a_sum = PathMatrix::zeros(if stochastic { n + 1 } else { 0 }, npaths);
    let mut rho_pow = vec![1.0f64; n + 1];
    for k in 1..=n {
        rho_pow[k] = rho_pow[k - 1] * rho;
    }
    for k in 0..n {
        let th = bundle.theta.row(k);
        let z = bundle.density.row(k);
        let dwt = bundle.dwt.row(k);
        let (e_prev, e_next) = e_flow.step_rows(k);
        for j in 0..npaths {
            e_next[j] = e_prev[j] * flow_multiplier(th[j], dwt[j], h);
        }
        if stochastic {
            let e_next = e_flow.row(k + 1);
            let (a_prev, a_next) = a_sum.step_rows(k);
            for j in 0..npaths {
                a_next[j] =
                    a_prev[j] + z[j] * rho_pow[k] * (2.0 * th[j] * h - dwt[j]) / e_next[j];
            }
        }
    }

    // Backward pass: trapezoid suffixes
    //   T1(m)  = ∫ c₁ E,  TGA(m) = ∫ c₁ E A,  TC(m) = ∫ c₂ ρ^u,
    // each as h(Σ_{u≥m} g_u − g_m/2 − g_N/2), then
    //   λ_m = −(T1/E_m) Z̃_m θ̃_m + v (TGA − A_m T1 + TC)/ρ^m.
    let mut lambda = PathMatrix::zeros(n + 1, npaths);
    let mut sum_g = vec![0.0f64; npaths];
    let mut sum_ga = vec![0.0f64; npaths];
    let mut sum_c2r = vec![0.0f64; npaths];
    let mut g_last = vec![0.0f64; npaths];
    let mut ga_last = vec![0.0f64; npaths];
    let mut c2r_last = vec![0.0f64; npaths];

    for m in (0..=n).rev() {
        let th = bundle.theta.row(m);
        let z = bundle.density.row(m);
        let e_m = e_flow.row(m);
        let lam = lambda.row_mut(m);
        for j in 0..npaths {
            let zy = y * z[j];
            let c1 = y * utility.correction_density_deriv(zy) * th[j] * th[j];
            let g = c1 * e_m[j];
            sum_g[j] += g;
            if m == n {
                g_last[j] = g;
            }
            let t1 = h * (sum_g[j] - 0.5 * g - 0.5 * g_last[j]);
            let mut value = -(t1 / e_m[j]) * z[j] * th[j];
            if stochastic {
                let a_m = a_sum.at(m, j);
                let ga = g * a_m;
                let c2r = 2.0 * utility.correction_density(zy) * th[j] * rho_pow[m];
                sum_ga[j] += ga;
                sum_c2r[j] += c2r;
                if m == n {
                    ga_last[j] = ga;
                    c2r_last[j] = c2r;
                }
                let tga = h * (sum_ga[j] - 0.5 * ga - 0.5 * ga_last[j]);
                let tc = h * (sum_c2r[j] - 0.5 * c2r - 0.5 * c2r_last[j]);
                value += vol * (tga - a_m * t1 + tc) / rho_pow[m];
            }
            lam[j] = value;
        }
    }
    lambda
}

/// λ by per-anchor integration of the flow recursions, O(N²) per path.
/// Reference implementation: slower, no clever algebra, kept as the ground
/// truth the fast solver is tested against.
pub fn correction_derivative_direct(
    bundle: &Bundle,
    model: &RiskPriceModel,
    utility: &Utility,
    x: f64,
) -> PathMatrix {
    let n = bundle.grid.steps();
    let h = bundle.grid.h();
    let npaths = bundle.npaths();
    let y = utility.marginal(x);

    let c1_at = |k: usize, j: usize| {
        let th = bundle.theta.at(k, j);
        y * utility.correction_density_deriv(y * bundle.density.at(k, j)) * th * th
    };
    let c2_at = |k: usize, j: usize| {
        2.0 * utility.correction_density(y * bundle.density.at(k, j)) * bundle.theta.at(k, j)
    };

    let mut lambda = PathMatrix::zeros(n + 1, npaths);
    for m in 0..=n {
        let k2 = kernel_response_series(model, h, n + 1 - m);
        let lam = lambda.row_mut(m);
        for j in 0..npaths {
            let mut p1 = 1.0f64;
            let mut p2 = 0.0f64;
            let mut i1_prev = c1_at(m, j) * p1;
            let mut i2_prev = c1_at(m, j) * p2 + c2_at(m, j) * k2[0];
            let mut r1 = 0.0f64;
            let mut r2 = 0.0f64;
            for k in m..n {
                let th = bundle.theta.at(k, j);
                let dwt = bundle.dwt.at(k, j);
                let mult = flow_multiplier(th, dwt, h);
                let source = bundle.density.at(k, j) * k2[k - m] * (2.0 * th * h - dwt);
                p1 *= mult;
                p2 = p2 * mult + source;
                let i1 = c1_at(k + 1, j) * p1;
                let i2 = c1_at(k + 1, j) * p2 + c2_at(k + 1, j) * k2[k + 1 - m];
                r1 += 0.5 * h * (i1_prev + i1);
                r2 += 0.5 * h * (i2_prev + i2);
                i1_prev = i1;
                i2_prev = i2;
            }
            lam[j] = -r1 * bundle.density.at(m, j) * bundle.theta.at(m, j) + r2;
        }
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::Measure;
    use crate::grid::TimeGrid;

    fn ou() -> RiskPriceModel {
        RiskPriceModel::OrnsteinUhlenbeck { alpha: 0.5, beta: 1.0, vol: 0.3, initial: 0.2 }
    }

    #[test]
    fn fast_equals_direct_for_both_models() {
        let grid = TimeGrid::new(1.0, 48).unwrap();
        let u = Utility::Power { p: 0.5 };
        for model in [RiskPriceModel::Constant { theta: 0.4 }, ou()] {
            let b = Bundle::evolve(&model, grid, 64, 13, Measure::RiskNeutral);
            let fast = correction_derivative(&b, &model, &u, 1.0);
            let direct = correction_derivative_direct(&b, &model, &u, 1.0);
            let mut scale = 0.0f64;
            for m in 0..=48 {
                for j in 0..64 {
                    scale = scale.max(direct.at(m, j).abs());
                }
            }
            for m in 0..=48 {
                for j in 0..64 {
                    let d = (fast.at(m, j) - direct.at(m, j)).abs();
                    assert!(d <= 1e-11 * scale, "m={m} j={j} diff={d:.3e}");
                }
            }
        }
    }

    #[test]
    fn terminal_anchor_vanishes() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let model = ou();
        let u = Utility::Power { p: 0.5 };
        let b = Bundle::evolve(&model, grid, 10, 3, Measure::RiskNeutral);
        let lam = correction_derivative(&b, &model, &u, 1.0);
        for j in 0..10 {
            assert_eq!(lam.at(16, j), 0.0);
        }
    }
}
