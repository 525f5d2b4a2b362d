use thiserror::Error;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("empty subset")]
    EmptySubset,
    #[error("not a chain")]
    NotAChain,
    #[error("out of scope")]
    OutOfScope,
    #[error("insufficient depth: need {needed}, host has {available}")]
    InsufficientDepth { needed: u64, available: u64 },
    #[error("oracle infeasible: more than {limit} search nodes")]
    OracleInfeasible { limit: u64 },
    #[error("instance gap: depths {left} and {right} are not more than {gap} apart")]
    InstanceGap { left: u32, right: u32, gap: u32 },
    #[error("incompatible point {0}")]
    Incompatible(String),
    #[error("unrealizable sample")]
    Unrealizable,
    #[error("invalid vertex path {0:?}")]
    BadPath(String),
    #[error("invalid type string {0:?}")]
    BadType(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("{0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
