use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("degenerate shape at layer {layer} ({name}): {detail}")]
    DegenerateShape {
        layer: usize,
        name: String,
        detail: String,
    },
    #[error("invalid grouping: {0}")]
    InvalidGrouping(String),
    #[error("empty fusion group")]
    EmptyGroup,
    #[error("{count} candidate groupings exceed the cap of {cap}")]
    TooManyGroupings { count: u128, cap: u64 },
    #[error("configuration set is empty")]
    EmptyConfigSet,
    #[error("invalid hardware configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid technology parameter: {0}")]
    InvalidTech(String),
}

pub type Result<T> = std::result::Result<T, Error>;
