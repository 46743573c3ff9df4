//! Smooth truncation of the conditioning state.
//!
//! The derivative and regression stages work on functions of (θ̃, Z̃), whose
//! heavy tails can dominate the fit at modest path counts. `TruncationMap` is
//! a C¹ odd cap: identity on [-k, k], a Hermite ramp on [k, 2k], constant
//! 1.5k beyond, so |φ(x)| ≤ |x| and |φ′| ≤ 1 everywhere. `StateTruncation`
//! applies one map to θ̃ and one to ln Z̃, with levels set as a multiple of
//! each state's own |·| tail quantile. The terminal target is never touched,
//! so a ladder of levels measures the bias the cap introduces.

use crate::bundle::Bundle;
use crate::stats;

#[derive(Debug, Clone, Copy)]
pub struct TruncationMap {
    level: f64,
}

impl TruncationMap {
    /// `level` is the half-width k of the identity region; must be positive.
    pub fn new(level: f64) -> Self {
        assert!(level > 0.0, "truncation level must be positive");
        Self { level }
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    /// Odd, C¹, identity on [-k, k], flat at ±1.5k outside [-2k, 2k].
    pub fn apply(&self, x: f64) -> f64 {
        let k = self.level;
        let a = x.abs();
        let y = if a <= k {
            a
        } else if a <= 2.0 * k {
            // Hermite blend: value k and slope 1 at s = 0, value 1.5k and
            // slope 0 at s = 1.
            let s = (a - k) / k;
            k * (1.0 + s - 0.5 * s * s)
        } else {
            1.5 * k
        };
        y.copysign(x)
    }
}

/// Caps for the two conditioning states.
#[derive(Debug, Clone, Copy)]
pub struct StateTruncation {
    pub theta: TruncationMap,
    pub log_density: TruncationMap,
}

impl StateTruncation {
    pub fn new(theta_level: f64, log_density_level: f64) -> Self {
        Self {
            theta: TruncationMap::new(theta_level),
            log_density: TruncationMap::new(log_density_level),
        }
    }

    /// Levels at `multiple` times the empirical 99.9% quantile of |θ̃| and
    /// |ln Z̃| over all nodes and paths of the bundle.
    pub fn at_quantile_multiple(bundle: &Bundle, multiple: f64) -> Self {
        assert!(multiple > 0.0);
        let q = 0.999;
        let abs_theta: Vec<f64> = bundle.theta.data().iter().map(|v| v.abs()).collect();
        let abs_lnz: Vec<f64> = bundle.density.data().iter().map(|v| v.ln().abs()).collect();
        // floor keeps the level positive when a state is degenerate at 0
        let th_level = (multiple * stats::quantile(&abs_theta, q)).max(1e-8);
        let lz_level = (multiple * stats::quantile(&abs_lnz, q)).max(1e-8);
        Self::new(th_level, lz_level)
    }

    /// Bundle copy with both states capped; the increments are untouched.
    pub fn apply_to_bundle(&self, bundle: &Bundle) -> Bundle {
        let mut theta = bundle.theta.clone();
        for v in theta.data_mut() {
            *v = self.theta.apply(*v);
        }
        let mut density = bundle.density.clone();
        for v in density.data_mut() {
            *v = self.log_density.apply(v.ln()).exp();
        }
        Bundle { grid: bundle.grid, theta, density, dwt: bundle.dwt.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::Measure;
    use crate::grid::TimeGrid;
    use crate::model::RiskPriceModel;

    #[test]
    fn identity_inside_the_level() {
        let m = TruncationMap::new(3.0);
        for x in [-3.0, -1.2, 0.0, 0.5, 3.0] {
            assert_eq!(m.apply(x), x);
        }
    }

    #[test]
    fn flat_beyond_twice_the_level() {
        let m = TruncationMap::new(2.0);
        assert_eq!(m.apply(4.0), 3.0);
        assert_eq!(m.apply(17.0), 3.0);
        assert_eq!(m.apply(-9.0), -3.0);
    }

    #[test]
    fn ramp_is_continuous_with_matching_slopes() {
        let m = TruncationMap::new(1.5);
        let k = 1.5;
        let eps = 1e-7;
        // value continuity at k and 2k
        assert!((m.apply(k + 1e-12) - k).abs() < 1e-9);
        assert!((m.apply(2.0 * k - 1e-12) - 1.5 * k).abs() < 1e-9);
        // slope 1 just inside the ramp, slope 0 just before the cap
        let slope_at = |x: f64| (m.apply(x + eps) - m.apply(x - eps)) / (2.0 * eps);
        assert!((slope_at(k + 10.0 * eps) - 1.0).abs() < 1e-4);
        assert!(slope_at(2.0 * k - 10.0 * eps).abs() < 1e-4);
    }

    #[test]
    fn map_is_odd_monotone_and_dominated() {
        let m = TruncationMap::new(0.8);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..400 {
            let x = -4.0 + i as f64 * 0.02;
            let y = m.apply(x);
            assert!((y + m.apply(-x)).abs() < 1e-15);
            assert!(y.abs() <= x.abs() + 1e-15);
            assert!(y >= prev);
            prev = y;
        }
    }

    #[test]
    fn quantile_levels_sit_in_the_tail() {
        let model = RiskPriceModel::OrnsteinUhlenbeck {
            alpha: 0.5,
            beta: 1.0,
            vol: 0.3,
            initial: 0.2,
        };
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let bundle = Bundle::evolve(&model, grid, 2_000, 31, Measure::RiskNeutral);
        let tr = StateTruncation::at_quantile_multiple(&bundle, 4.0);
        // at 4x the 99.9% quantile almost nothing is clipped
        let clipped = bundle
            .theta
            .data()
            .iter()
            .filter(|v| v.abs() > tr.theta.level())
            .count();
        assert_eq!(clipped, 0);
        assert!(tr.log_density.level() > 0.0);
    }
}
