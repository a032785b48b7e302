use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller passed an argument that breaks an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("t = {0} lies outside [0, pi]")]
    Domain(f64),

    #[error("mask is empty")]
    EmptyMask,

    #[error("inconsistent observations on diagonal {diagonal}: {first} vs {second}")]
    InconsistentDiagonal {
        diagonal: usize,
        first: f64,
        second: f64,
    },

    #[error("constraint matrix B ({m}x{n}) does not have full row rank")]
    RankDeficient { m: usize, n: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("bound polynomials violate upper > 0 > lower: {0}")]
    InvalidBounds(String),

    /// Finite LP has no nonnegative solution; `farkas` is a vector y with
    /// y'A <= 0 and y'b > 0.
    #[error("linear program is infeasible (phase-1 residual {infeasibility:e})")]
    Infeasible { farkas: Vec<f64>, infeasibility: f64 },

    #[error("linear program is unbounded")]
    Unbounded { ray: Vec<f64> },

    #[error("simplex iteration limit ({0}) reached")]
    LpIterationLimit(usize),

    #[error("singular basis encountered in simplex")]
    SingularBasis,

    #[error("no convergence after {iterations} iterations (max violation {max_violation:e}); trace: {trace}")]
    NonConvergence {
        iterations: usize,
        max_violation: f64,
        trace: String,
    },

    /// Something the math says cannot happen did happen.
    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("certification failed at check `{check}`: {detail}")]
    Certification { check: String, detail: String },

    #[error("instance generation failed: {0}")]
    Generation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
