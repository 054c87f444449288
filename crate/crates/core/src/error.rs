use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("duality violation: primal {primal} is below dual {dual} (gap {gap:e})")]
    DualityViolation { primal: f64, dual: f64, gap: f64 },

    #[error(
        "line search failed after {halvings} halvings (t = {step}, |x|^2 = {step_norm_sq:e}, F(z) = {objective})"
    )]
    LineSearch {
        halvings: usize,
        step: f64,
        step_norm_sq: f64,
        objective: f64,
    },

    #[error("subsolver did not certify its stopping rule within {iterations} iterations (last gap {gap:e})")]
    Subsolver { iterations: usize, gap: f64 },

    #[error("problem not supported by this subsolver: {0}")]
    Unsupported(String),

    #[error("degenerate node {0}: similarity row sums to zero")]
    DegenerateNode(usize),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("outer iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}
