//! Utility functions and the correction density F.
//!
//! For each utility, I is the inverse of the marginal U′ and
//! F(z) = z I′(z) + ½ z² I″(z) is the risk-neutral drift density of
//! t ↦ I(yZ̃(t)): the correction process V_x(t) = ∫₀ᵗ F(U′(x)Z̃(u))‖θ̃(u)‖² du
//! absorbs exactly that drift, which is what makes the myopic wealth
//! I(U′(x)Z̃) − V_x a martingale under the risk-neutral measure:
//!
//! * log:          I(y) = 1/y,            F ≡ 0 (the myopic case),
//! * power p < 1:  I(y) = y^q, q = 1/(p−1), F(z) = z^q · p / (2(p−1)²),
//! * exponential:  I(y) = −ln(y/a)/a,     F ≡ −1/(2a).
//!
//! The exponential utility fails the Inada condition at zero wealth; it is
//! supported because F and the hedge stay well defined, and callers can check
//! `satisfies_inada` to flag it.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Utility {
    Log,
    Power { p: f64 },
    Exponential { a: f64 },
}

impl Utility {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Utility::Log => Ok(()),
            Utility::Power { p } => {
                if !(p < 1.0) || p == 0.0 || !p.is_finite() {
                    Err(Error::InvalidParameter(format!(
                        "power exponent must satisfy p < 1, p != 0, got {p}"
                    )))
                } else {
                    Ok(())
                }
            }
            Utility::Exponential { a } => {
                if !(a > 0.0) || !a.is_finite() {
                    Err(Error::InvalidParameter(format!(
                        "exponential coefficient must be positive, got {a}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn satisfies_inada(&self) -> bool {
        !matches!(self, Utility::Exponential { .. })
    }

    /// Marginal utility U′(x).
    pub fn marginal(&self, x: f64) -> f64 {
        match *self {
            Utility::Log => 1.0 / x,
            Utility::Power { p } => x.powf(p - 1.0),
            Utility::Exponential { a } => (-a * x).exp(),
        }
    }

    /// I(y), the inverse of the marginal.
    pub fn inverse_marginal(&self, y: f64) -> f64 {
        match *self {
            Utility::Log => 1.0 / y,
            Utility::Power { p } => y.powf(1.0 / (p - 1.0)),
            Utility::Exponential { a } => -y.ln() / a,
        }
    }

    /// I′(y).
    pub fn inverse_marginal_deriv(&self, y: f64) -> f64 {
        match *self {
            Utility::Log => -1.0 / (y * y),
            Utility::Power { p } => {
                let q = 1.0 / (p - 1.0);
                q * y.powf(q - 1.0)
            }
            Utility::Exponential { a } => -1.0 / (a * y),
        }
    }

    /// Correction density F(z) = ½ z I′(z).
    pub fn correction_density(&self, z: f64) -> f64 {
        match *self {
            Utility::Log => 0.0,
            Utility::Power { p } => {
                let q = 1.0 / (p - 1.0);
                z.powf(q) * p / (2.0 * (p - 1.0) * (p - 1.0))
            }
            Utility::Exponential { a } => -0.5 / a,
        }
    }

    /// F′(z).
    pub fn correction_density_deriv(&self, z: f64) -> f64 {
        match *self {
            Utility::Log | Utility::Exponential { .. } => 0.0,
            Utility::Power { p } => {
                let q = 1.0 / (p - 1.0);
                q * z.powf(q - 1.0) * p / (2.0 * (p - 1.0) * (p - 1.0))
            }
        }
    }

    /// How the mean terminal correction Ẽ V_z(T) depends on the wealth
    /// argument z. Drives the split-point objective without re-sweeping paths.
    pub fn correction_shape(&self) -> CorrectionShape {
        match self {
            Utility::Log => CorrectionShape::Zero,
            Utility::Power { .. } => CorrectionShape::LinearInWealth,
            Utility::Exponential { .. } => CorrectionShape::ConstantInWealth,
        }
    }
}

/// Dependence of z ↦ Ẽ V_z(T) for a fixed path set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrectionShape {
    /// V ≡ 0 (log utility).
    Zero,
    /// V_z = z · V_1 (power utility: F(U′(z)Z̃) = z F(Z̃) since U′ scales as z^{p−1}).
    LinearInWealth,
    /// V_z independent of z (exponential utility: F constant).
    ConstantInWealth,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn frozen_power_values() {
        let u = Utility::Power { p: 0.5 };
        assert_eq!(u.marginal(4.0), 0.5);
        assert_eq!(u.inverse_marginal(2.0), 0.25);
        assert_eq!(u.inverse_marginal_deriv(2.0), -0.25);
        assert_eq!(u.correction_density(2.0), 0.25);
        assert_eq!(u.correction_density_deriv(2.0), -0.25);
    }

    #[test]
    fn exponential_constants() {
        let u = Utility::Exponential { a: 1.0 };
        assert_eq!(u.correction_density(3.7), -0.5);
        assert_eq!(u.correction_density_deriv(3.7), 0.0);
        assert!((u.inverse_marginal(u.marginal(1.3)) - 1.3).abs() < 1e-15);
        assert!(!u.satisfies_inada());
    }

    #[test]
    fn validation_rejects_bad_exponents() {
        assert!(Utility::Power { p: 1.0 }.validate().is_err());
        assert!(Utility::Power { p: 0.0 }.validate().is_err());
        assert!(Utility::Power { p: 1.5 }.validate().is_err());
        assert!(Utility::Exponential { a: 0.0 }.validate().is_err());
        assert!(Utility::Power { p: -2.0 }.validate().is_ok());
    }

    proptest! {
        // I inverts the marginal, and F(z) = zI′(z) + ½z²I″(z) with I″ taken
        // by central differences, across the families and their parameter
        // ranges. The second relation is what makes I(U′(x)Z̃) − V driftless
        // under the risk-neutral measure.
        #[test]
        fn inverse_and_density_identities(
            p in -4.0f64..0.95,
            a in 0.1f64..5.0,
            x in 0.05f64..20.0,
            z in 0.5f64..10.0,
        ) {
            prop_assume!(p != 0.0 && (p - 1.0).abs() > 1e-3);
            for u in [Utility::Log, Utility::Power { p }, Utility::Exponential { a }] {
                let y = u.marginal(x);
                prop_assert!((u.inverse_marginal(y) - x).abs() <= 1e-9 * x.max(1.0));
                let eps = 1e-5 * z;
                let i2 = (u.inverse_marginal_deriv(z + eps) - u.inverse_marginal_deriv(z - eps))
                    / (2.0 * eps);
                let drift = z * u.inverse_marginal_deriv(z) + 0.5 * z * z * i2;
                let f = u.correction_density(z);
                let scale = f.abs().max(z * u.inverse_marginal_deriv(z).abs()).max(1e-3);
                prop_assert!((f - drift).abs() <= 1e-5 * scale);
            }
        }
    }
}
