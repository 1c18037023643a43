//! File-backed n-gram and ∞-gram indexes: ingest, suffix-table build,
//! memory-mapped querying, evaluation runs and the HTTP service.

pub mod api;
pub mod build;
pub mod decontam_io;
pub mod eval_io;
pub mod ingest;
pub mod manifest;
pub mod records;
pub mod service;
pub mod store;
pub mod tokenizer;

pub use api::{execute, ExecOptions, QueryInput, QueryRequest, QueryType};
pub use store::CorpusIndex;
