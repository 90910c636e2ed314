use thiserror::Error;

use crate::model::Hypothesis;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter lies outside the domain of the formula or model.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("divergence is infinite: {0}")]
    DivergenceInfinite(String),

    #[error("invalid parameters: {0}")]
    Parameter(String),

    #[error("self-loop query on vertex {0}")]
    SelfLoop(u32),

    #[error("vertex {vertex} out of range for n = {n}")]
    VertexOutOfRange { vertex: u32, n: u32 },

    #[error("query budget of {budget} exhausted")]
    BudgetExhausted { budget: u64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("infeasible configuration: {0}")]
    InfeasibleConfig(String),

    #[error("trial {index} under {hypothesis}: {source}")]
    Trial {
        hypothesis: Hypothesis,
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
