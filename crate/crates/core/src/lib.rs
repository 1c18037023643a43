//! Suffix-array primitives for n-gram and unbounded-n ("∞-gram") language
//! modeling over tokenized corpora.
//!
//! The crate is `no_std` (with `alloc`). Every index component is accessed
//! through a byte buffer implementing `AsRef<[u8]>`, so callers may back an
//! index with memory-mapped files or plain vectors. File layout, CLI and
//! service plumbing live in the companion `infgram-engine` crate.
//!
//! Layout recap:
//!
//! * token array: 2-byte big-endian token IDs, every document terminated by
//!   the separator `0xFFFF`;
//! * suffix table (one per shard): `N_s` little-endian entries of `P` bytes,
//!   each the shard-relative byte offset of a token, ordered by the byte
//!   suffix starting there;
//! * document table: 8-byte little-endian start offsets (plus a final
//!   sentinel), newline-terminated metadata lines and their offsets.

#![no_std]

extern crate alloc;

pub mod cnf;
pub mod decontam;
pub mod error;
pub mod eval;
pub mod index;
pub mod lm;
pub mod memory;
pub mod ratio;
pub mod sais;
pub mod search;
pub mod table;
pub mod token;

pub use error::{Error, Result};
pub use index::{DocTable, Index, IndexStats, Part, ShardTable, Sign, Tally};
pub use lm::{Backoff, InfgramResult, LmConfig, NextTokenDistribution, NgramProb};
pub use ratio::Ratio;
pub use search::{DocRef, Location, Positions, SegmentRange, Segments};
pub use token::{Token, SEPARATOR, UNK};
