//! Asset market with constant volatility structure.
//!
//! dS_i = S_i(α_i dt + Σ_j σ_ij dW_j) with σ nonsingular. The implied price
//! of risk is θ = σ⁻¹α; the fixed-mix optimizer of a power/log investor holds
//! value weights ζ = (σσᵀ)⁻¹α / (1 − p).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Market {
    sigma: DMatrix<f64>,
    alpha: DVector<f64>,
    spot: DVector<f64>,
    sigma_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Market {
    pub fn new(sigma: DMatrix<f64>, alpha: DVector<f64>, spot: DVector<f64>) -> Result<Self> {
        let n = sigma.nrows();
        if sigma.ncols() != n || alpha.len() != n || spot.len() != n {
            return Err(Error::InvalidParameter(format!(
                "dimension mismatch: sigma {}x{}, alpha {}, spot {}",
                sigma.nrows(),
                sigma.ncols(),
                alpha.len(),
                spot.len()
            )));
        }
        if spot.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidParameter("spot prices must be positive".into()));
        }
        let sigma_lu = sigma.clone().lu();
        if sigma_lu.determinant().abs() < 1e-12 {
            return Err(Error::SingularVolatility);
        }
        Ok(Self { sigma, alpha, spot, sigma_lu })
    }

    /// Single-asset market with drift implied by σ and the initial price of
    /// risk: α = σθ.
    pub fn single(sigma: f64, spot: f64, theta0: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, sigma),
            DVector::from_element(1, sigma * theta0),
            DVector::from_element(1, spot),
        )
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn spot(&self) -> &DVector<f64> {
        &self.spot
    }

    /// θ = σ⁻¹α.
    pub fn price_of_risk(&self) -> DVector<f64> {
        self.sigma_lu
            .solve(&self.alpha)
            .expect("nonsingular by construction")
    }

    /// Fixed-mix value weights (σσᵀ)⁻¹α/(1−p); p = 0 is the log case.
    pub fn fixed_mix_weights(&self, p: f64) -> DVector<f64> {
        let gram = &self.sigma * self.sigma.transpose();
        let w = gram.lu().solve(&self.alpha).expect("nonsingular by construction");
        w / (1.0 - p)
    }

    /// Scalar σ of a single-asset market.
    pub fn sigma_scalar(&self) -> f64 {
        debug_assert_eq!(self.dim(), 1);
        self.sigma[(0, 0)]
    }

    pub fn spot_scalar(&self) -> f64 {
        debug_assert_eq!(self.dim(), 1);
        self.spot[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_asset_price_of_risk_roundtrips() {
        let m = Market::single(0.2, 1.0, 0.4).unwrap();
        assert!((m.price_of_risk()[0] - 0.4).abs() < 1e-15);
        // log investor: ζ = α/σ² = θ/σ
        assert!((m.fixed_mix_weights(0.0)[0] - 2.0).abs() < 1e-15);
        // p = 0.5 doubles the weight
        assert!((m.fixed_mix_weights(0.5)[0] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn two_asset_weights_solve_the_gram_system() {
        let sigma = DMatrix::from_row_slice(2, 2, &[0.2, 0.05, 0.0, 0.3]);
        let alpha = DVector::from_row_slice(&[0.06, 0.09]);
        let spot = DVector::from_row_slice(&[1.0, 2.0]);
        let m = Market::new(sigma.clone(), alpha.clone(), spot).unwrap();
        let w = m.fixed_mix_weights(0.0);
        let back = &sigma * sigma.transpose() * &w;
        assert!((back - alpha).norm() < 1e-12);
    }

    #[test]
    fn singular_volatility_is_rejected() {
        let sigma = DMatrix::from_row_slice(2, 2, &[0.2, 0.1, 0.4, 0.2]);
        let alpha = DVector::from_row_slice(&[0.05, 0.05]);
        let spot = DVector::from_row_slice(&[1.0, 1.0]);
        assert!(matches!(
            Market::new(sigma, alpha, spot),
            Err(Error::SingularVolatility)
        ));
    }
}
