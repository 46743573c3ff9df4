//! Co-evolved state paths under either sampling measure.
//!
//! A bundle holds, on one grid, the θ̃ path, the martingale density
//! Z̃ = exp(−∫θ̃dW − ½∫θ̃²du), and the risk-neutral increments ΔW̃. The two
//! increment families are linked by ΔW̃_k = ΔW_k + θ̃_k h; sampling draws one
//! family as N(0, h) and recovers the other, so the same code serves physical
//! sampling (identity checks under P) and risk-neutral sampling (pricing,
//! hedging, the split point).

use crate::grid::TimeGrid;
use crate::model::RiskPriceModel;
use crate::paths::{brownian_increments, PathMatrix};

/// Which increment family is drawn as the Brownian sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Physical,
    RiskNeutral,
}

#[derive(Debug, Clone)]
pub struct Bundle {
    pub grid: TimeGrid,
    /// θ̃ at the nodes, (steps + 1) × paths.
    pub theta: PathMatrix,
    /// Z̃ at the nodes, (steps + 1) × paths.
    pub density: PathMatrix,
    /// ΔW̃, steps × paths.
    pub dwt: PathMatrix,
}

impl Bundle {
    pub fn npaths(&self) -> usize {
        self.theta.cols()
    }

    /// Evolve from freshly drawn increments of the given measure.
    pub fn evolve(
        model: &RiskPriceModel,
        grid: TimeGrid,
        npaths: usize,
        master_seed: u64,
        measure: Measure,
    ) -> Self {
        let noise = brownian_increments(master_seed, npaths, grid.steps(), grid.h());
        Self::evolve_from(model, grid, noise, measure)
    }

    /// Evolve from given increments (common-random-number ladders hand in
    /// coarsened fine-grid noise here). `noise` is consumed as ΔW or ΔW̃
    /// according to `measure`.
    pub fn evolve_from(
        model: &RiskPriceModel,
        grid: TimeGrid,
        noise: PathMatrix,
        measure: Measure,
    ) -> Self {
        let npaths = noise.cols();
        let steps = grid.steps();
        assert_eq!(noise.rows(), steps);
        let h = grid.h();

        let mut theta = PathMatrix::zeros(steps + 1, npaths);
        let mut density = PathMatrix::zeros(steps + 1, npaths);
        // Physical rows hold ΔW on entry and are rewritten to ΔW̃ in the sweep.
        let mut dwt = noise;

        theta.row_mut(0).fill(model.theta_initial());
        density.row_mut(0).fill(1.0);
        let mut ln_z = vec![0.0f64; npaths];

        for k in 0..steps {
            let (th_k, th_next) = theta.step_rows(k);
            let dn = dwt.row_mut(k);
            let z_next = density.row_mut(k + 1);
            for j in 0..npaths {
                let th = th_k[j];
                let dw = match measure {
                    Measure::RiskNeutral => dn[j] - th * h,
                    Measure::Physical => {
                        let dw = dn[j];
                        dn[j] = dw + th * h;
                        dw
                    }
                };
                th_next[j] = model.step(th, h, dw);
                ln_z[j] += -th * dw - 0.5 * th * th * h;
                z_next[j] = ln_z[j].exp();
            }
        }

        Self { grid, theta, density, dwt }
    }

    /// Physical increment ΔW_k for path `j`, recovered from ΔW̃.
    pub fn dw(&self, k: usize, j: usize) -> f64 {
        self.dwt.at(k, j) - self.theta.at(k, j) * self.grid.h()
    }
}
