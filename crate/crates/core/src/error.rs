use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("absolute continuity violated at (s={state}, a={action}): d={mass:e} where d^D = 0")]
    AbsoluteContinuity { state: usize, action: usize, mass: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("flow constraint cannot be met at state {state}: {reason}")]
    Infeasible { state: usize, reason: String },

    #[error("solver did not converge after {iterations} iterations (KKT residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("enumeration of {count} deterministic policies exceeds budget {budget}")]
    EnumerationBudget { count: f64, budget: usize },

    #[error("unknown experiment suite `{0}`")]
    UnknownSuite(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }
}
