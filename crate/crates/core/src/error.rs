use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("query is empty")]
    EmptyQuery,
    #[error("query contains the document separator token")]
    SeparatorInQuery,
    #[error("document is empty")]
    EmptyDocument,
    #[error("no documents given")]
    NoDocuments,
    #[error("signed count {0} is negative; the subtracted index is not a subset")]
    NegativeCount(i128),
    #[error("n = {n} needs {n} - 1 context tokens but only {available} are available")]
    ContextTooShort { n: usize, available: usize },
    #[error("n must be at least 1")]
    ZeroOrder,
    #[error("byte offset {0} is outside the token array")]
    OffsetOutOfRange(u64),
    #[error("byte offset {0} does not address a document token")]
    NotInDocument(u64),
    #[error("clause {clause} is too frequent: its terms exceed the per-term count ceiling {ceiling}")]
    ClauseTooFrequent { clause: usize, ceiling: u64 },
    #[error("query syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("malformed index: {0}")]
    Malformed(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
