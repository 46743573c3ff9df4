use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("singular volatility matrix")]
    SingularVolatility,
    #[error("split-point bracket failed: h({z:.6e}) = {value:.6e} after {expansions} expansions")]
    BracketFailed {
        z: f64,
        value: f64,
        expansions: u32,
    },
    #[error("regression normal system not positive definite at node {node}")]
    RegressionSolve { node: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
