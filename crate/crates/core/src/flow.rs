//! Variational flow of the (Z̃, θ̃) state.
//!
//! Perturbing the Brownian path at time s propagates through the state SDEs
//! by the linearized flow Φ(t, s). Its Z̃-direction is the multiplicative
//! Euler flow E of dZ̃ = −Z̃θ̃dW: one step multiplies by
//!     M_k = 1 + θ̃_k²h − θ̃_kΔW̃_k,
//! and Φ^{1,1}(t_k, t_m) = E_k/E_m exactly at scheme level. The θ̃-direction
//! of the OU kernel solves the deterministic pair
//!     φ′ = −vφ + vβJ,   J′ = φ − βJ,   φ(s) = 1, J(s) = 0,
//! whose response kernel k₂ = v(φ − βJ) has the closed form
//! k₂(t; s) = v e^{−(v+β)(t−s)}; one Heun step multiplies it by
//! ρ = 1 − h(v+β) + h²(v+β)²/2, which the fast solver exploits.

use crate::bundle::Bundle;
use crate::model::RiskPriceModel;
use crate::paths::PathMatrix;

/// One multiplicative step of the Z̃-direction flow.
#[inline]
pub fn flow_multiplier(theta: f64, dwt: f64, h: f64) -> f64 {
    1.0 + theta * theta * h - theta * dwt
}

/// Running Euler flow E with E_0 = 1, per path.
pub fn density_flow(bundle: &Bundle) -> PathMatrix {
    let n = bundle.grid.steps();
    let h = bundle.grid.h();
    let npaths = bundle.npaths();
    let mut e = PathMatrix::zeros(n + 1, npaths);
    e.row_mut(0).fill(1.0);
    for k in 0..n {
        let th = bundle.theta.row(k);
        let dwt = bundle.dwt.row(k);
        let (prev, next) = e.step_rows(k);
        for j in 0..npaths {
            next[j] = prev[j] * flow_multiplier(th[j], dwt[j], h);
        }
    }
    e
}

/// Heun eigenvalue of the kernel pair over one step: the discrete response
/// kernel is exactly k̂₂(d) = v·ρ^d.
pub fn kernel_decay_factor(model: &RiskPriceModel, h: f64) -> f64 {
    match *model {
        RiskPriceModel::Constant { .. } => 0.0,
        RiskPriceModel::OrnsteinUhlenbeck { beta, vol, .. } => {
            let r = (vol + beta) * h;
            1.0 - r + 0.5 * r * r
        }
    }
}

/// Closed-form θ̃-direction flow Φ^{2,2}(t, s) = (β + v e^{−(v+β)(t−s)})/(β+v).
pub fn theta_flow_exact(model: &RiskPriceModel, dt: f64) -> Option<f64> {
    match *model {
        RiskPriceModel::OrnsteinUhlenbeck { beta, vol, .. } => {
            Some((beta + vol * (-(vol + beta) * dt).exp()) / (beta + vol))
        }
        _ => None,
    }
}

/// Closed-form response kernel k₂(t; s) = v e^{−(v+β)(t−s)}.
pub fn kernel_response_exact(model: &RiskPriceModel, dt: f64) -> Option<f64> {
    match *model {
        RiskPriceModel::OrnsteinUhlenbeck { beta, vol, .. } => {
            Some(vol * (-(vol + beta) * dt).exp())
        }
        _ => None,
    }
}

/// Heun integration of the kernel pair from an anchor, returning the discrete
/// response kernel v(φ − βJ) on the remaining nodes. The direct per-anchor
/// solver uses this; the fast solver replaces it with powers of
/// `kernel_decay_factor`.
pub fn kernel_response_series(model: &RiskPriceModel, h: f64, len: usize) -> Vec<f64> {
    match *model {
        RiskPriceModel::Constant { .. } => vec![0.0; len],
        RiskPriceModel::OrnsteinUhlenbeck { beta, vol, .. } => {
            let mut out = Vec::with_capacity(len);
            let (mut phi, mut j) = (1.0f64, 0.0f64);
            out.push(vol * (phi - beta * j));
            for _ in 1..len {
                let f1 = -vol * phi + vol * beta * j;
                let g1 = phi - beta * j;
                let (pp, jp) = (phi + h * f1, j + h * g1);
                let f2 = -vol * pp + vol * beta * jp;
                let g2 = pp - beta * jp;
                phi += 0.5 * h * (f1 + f2);
                j += 0.5 * h * (g1 + g2);
                out.push(vol * (phi - beta * j));
            }
            out
        }
    }
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
    fn heun_series_is_a_geometric_sequence() {
        let model = ou();
        let h = 1.0 / 128.0;
        let series = kernel_response_series(&model, h, 64);
        let rho = kernel_decay_factor(&model, h);
        for (d, &k2) in series.iter().enumerate() {
            let direct = 0.3 * rho.powi(d as i32);
            assert!((k2 - direct).abs() < 1e-13, "d = {d}");
        }
    }

    #[test]
    fn frozen_kernel_closed_forms() {
        let model = ou();
        // Φ^{2,2}(1, 0) = (1 + 0.3e^{−1.3})/1.3, k₂(1; 0) = 0.3e^{−1.3}
        assert!((theta_flow_exact(&model, 1.0).unwrap() - 0.832_122_721_469_387_6).abs() < 1e-15);
        assert!((kernel_response_exact(&model, 1.0).unwrap() - 0.081_759_537_910_204).abs() < 1e-15);
    }

    #[test]
    fn heun_converges_to_the_closed_forms() {
        let model = ou();
        let mut prev = f64::INFINITY;
        for steps in [64usize, 128, 256] {
            let h = 1.0 / steps as f64;
            let series = kernel_response_series(&model, h, steps + 1);
            let err = (series[steps] - kernel_response_exact(&model, 1.0).unwrap()).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn density_flow_is_the_scheme_derivative() {
        // Bump Z̃ at node m and rerun the multiplicative scheme: the response
        // at node k is exactly E_k/E_m because every later step is linear in
        // the current Z̃ level.
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let model = ou();
        let b = Bundle::evolve(&model, grid, 8, 77, Measure::RiskNeutral);
        let e = density_flow(&b);
        let h = grid.h();
        let m = 10;
        for j in 0..8 {
            let mut base = b.density.at(m, j);
            let mut bumped = base + 1.0;
            for k in m..32 {
                let mult = flow_multiplier(b.theta.at(k, j), b.dwt.at(k, j), h);
                base *= mult;
                bumped *= mult;
            }
            let response = bumped - base;
            let flow = e.at(32, j) / e.at(m, j);
            assert!((response - flow).abs() < 1e-12 * flow.abs().max(1.0));
        }
    }
}
