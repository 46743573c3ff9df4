//! Split point of the initial wealth.
//!
//! The optimal terminal wealth from x is I(U′(z*)Z̃(T)) where z* solves
//! z + Ẽ V_z(T) = x: wealth z* funds the myopic leg, the rest funds the
//! correction hedge. The objective is monotone in z; for the supported
//! utilities its z-dependence is affine over a fixed path set (V_z = z·V₁
//! for power, z-free for exponential, zero for log), which the solver
//! exploits to evaluate cheaply while still locating the root by bisection.

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::myopic::correction_terminal;
use crate::stats;
use crate::utility::{CorrectionShape, Utility};

/// Ẽ V_z(T) as a function of z for a fixed path set: intercept + slope·z.
#[derive(Debug, Clone, Copy)]
pub struct CorrectionCurve {
    pub intercept: f64,
    pub slope: f64,
    /// Standard error of the Monte Carlo estimate at z = 1.
    pub se_at_one: f64,
}

impl CorrectionCurve {
    pub fn mean_correction(&self, z: f64) -> f64 {
        self.intercept + self.slope * z
    }

    /// Curve from V₁(T) samples at reference wealth 1.
    pub fn from_reference_samples(v1: &[f64], shape: CorrectionShape) -> Self {
        match shape {
            CorrectionShape::Zero => Self { intercept: 0.0, slope: 0.0, se_at_one: 0.0 },
            CorrectionShape::LinearInWealth => {
                let (mean, se) = stats::mean_and_se(v1);
                Self { intercept: 0.0, slope: mean, se_at_one: se }
            }
            CorrectionShape::ConstantInWealth => {
                let (mean, se) = stats::mean_and_se(v1);
                Self { intercept: mean, slope: 0.0, se_at_one: se }
            }
        }
    }

    /// Estimate the curve from the bundle. One sweep, skipped for log.
    pub fn estimate(bundle: &Bundle, utility: &Utility) -> Self {
        match utility.correction_shape() {
            CorrectionShape::Zero => Self { intercept: 0.0, slope: 0.0, se_at_one: 0.0 },
            shape => {
                let v1 = correction_terminal(bundle, utility, 1.0);
                Self::from_reference_samples(&v1, shape)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SplitPoint {
    pub z_star: f64,
    /// Ẽ V_{z*}(T) on the same paths.
    pub correction_mean: f64,
    pub iterations: u32,
}

/// Bisection for z* with tolerance `tol` (absolute in z). The zero-correction
/// case returns x exactly without iterating.
pub fn solve_split(curve: &CorrectionCurve, x: f64, tol: f64) -> Result<SplitPoint> {
    if !(x > 0.0) {
        return Err(Error::InvalidParameter(format!("initial wealth must be positive, got {x}")));
    }
    let objective = |z: f64| z + curve.mean_correction(z) - x;
    if curve.intercept == 0.0 && curve.slope == 0.0 {
        return Ok(SplitPoint { z_star: x, correction_mean: 0.0, iterations: 0 });
    }

    let mut lo = 0.0f64;
    let mut hi = x.max(1.0);
    let mut expansions = 0u32;
    while objective(hi) < 0.0 {
        hi *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::BracketFailed { z: hi, value: objective(hi), expansions });
        }
    }
    if objective(lo) > 0.0 {
        return Err(Error::BracketFailed { z: lo, value: objective(lo), expansions });
    }

    let mut iterations = 0u32;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if objective(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
        if iterations > 200 {
            break;
        }
    }
    let z_star = 0.5 * (lo + hi);
    Ok(SplitPoint { z_star, correction_mean: curve.mean_correction(z_star), iterations })
}

/// Closed form for the linear-in-wealth case: z* = x/(1 + c) with
/// c = Ẽ V₁(T). The bisection result is checked against this in the
/// acceptance suite with common random numbers.
pub fn linear_split_closed_form(x: f64, c: f64) -> f64 {
    x / (1.0 + c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_split_is_exact() {
        let curve = CorrectionCurve { intercept: 0.0, slope: 0.0, se_at_one: 0.0 };
        let s = solve_split(&curve, 1.7, 1e-10).unwrap();
        assert_eq!(s.z_star, 1.7);
        assert_eq!(s.iterations, 0);
    }

    #[test]
    fn bisection_agrees_with_the_affine_root() {
        let curve = CorrectionCurve { intercept: 0.0, slope: 0.174, se_at_one: 0.0 };
        let s = solve_split(&curve, 1.0, 1e-12).unwrap();
        assert!((s.z_star - 1.0 / 1.174).abs() < 1e-10);
        assert!((s.z_star + s.correction_mean - 1.0).abs() < 1e-10);
    }

    #[test]
    fn negative_correction_pushes_the_split_above_x() {
        // exponential utility: V < 0, so z* > x
        let curve = CorrectionCurve { intercept: -0.08, slope: 0.0, se_at_one: 0.0 };
        let s = solve_split(&curve, 1.0, 1e-12).unwrap();
        assert!((s.z_star - 1.08).abs() < 1e-10);
    }
}
