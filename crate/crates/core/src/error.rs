use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index out of range: {what} = {value}, bound {bound}")]
    IndexOutOfRange {
        what: &'static str,
        value: usize,
        bound: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("illumination scheme violates {0}")]
    Scheme(String),

    #[error("degenerate model: Q*Q vanishes at covered pixel ({row}, {col})")]
    DegenerateModel { row: usize, col: usize },

    #[error("degenerate graph: zero degree at vertex {vertex}")]
    DegenerateGraph { vertex: usize },

    #[error("operator is not Hermitian (relative mismatch {0:.3e})")]
    NotHermitian(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("solver failed at iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
