use thiserror::Error;

use crate::grid::ScalarField;

/// Errors raised by the grid, capacity, topology and solver operations.
#[derive(Debug, Error)]
pub enum FinepotError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("weight exponent {alpha} is not admissible for dim={dim}, p={p} (need {lo} < alpha < {hi})")]
    InadmissibleWeight {
        alpha: f64,
        dim: usize,
        p: f64,
        lo: f64,
        hi: f64,
    },

    #[error("exponent p={0} must satisfy p > 1")]
    InvalidExponent(f64),

    #[error("node sets or fields live on different domains")]
    DomainMismatch,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("the admissible set has no exterior: every node is free")]
    NoExterior,

    #[error("the admissible class is empty: {0}")]
    Infeasible(String),

    #[error("ball B({center:?}, {radius}) leaves the grid")]
    BallOutsideGrid { center: Vec<f64>, radius: f64 },

    #[error("requested {requested} dyadic scales but the grid resolves at most {max}")]
    TooManyScales { requested: usize, max: usize },

    #[error("solver did not converge after {iterations} iterations (kkt residual {kkt_residual:.3e})")]
    NonConvergence {
        iterations: usize,
        kkt_residual: f64,
        last_iterate: Box<ScalarField>,
    },
}

pub type Result<T> = std::result::Result<T, FinepotError>;
