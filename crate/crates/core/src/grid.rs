use crate::error::{Error, Result};

/// Uniform grid t_k = k·h on [0, T] with h = T/steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive and finite, got {t_final}"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidParameter("grid needs at least one step".into()));
        }
        Ok(Self { t_final, steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of nodes, steps + 1.
    pub fn nodes(&self) -> usize {
        self.steps + 1
    }

    pub fn h(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        debug_assert!(k <= self.steps);
        self.t_final * k as f64 / self.steps as f64
    }

    /// Grid with the same horizon and steps multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            t_final: self.t_final,
            steps: self.steps * factor,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_endpoints_are_exact() {
        let g = TimeGrid::new(1.0, 512).unwrap();
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(512), 1.0);
        assert_eq!(g.nodes(), 513);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::new(f64::NAN, 10).is_err());
    }
}
