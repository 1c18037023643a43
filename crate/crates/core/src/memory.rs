//! In-memory index construction, for tests and small corpora.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::index::{DocTable, Part, ShardTable, Sign};
use crate::table::{build_table, ShardingPlan};
use crate::token::{self, Token, SEPARATOR};

/// Token array, document offsets and metadata for a list of documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub tokens: Vec<u8>,
    /// Start byte of each document plus the final sentinel.
    pub doc_offsets: Vec<u64>,
    pub meta: Vec<u8>,
    pub meta_offsets: Vec<u64>,
}

impl Layout {
    pub fn new<D: AsRef<[Token]>>(docs: &[D], metadata: &[String]) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::NoDocuments);
        }
        let mut layout = Layout { tokens: Vec::new(), doc_offsets: Vec::new(), meta: Vec::new(), meta_offsets: Vec::new() };
        for (i, d) in docs.iter().enumerate() {
            let d = d.as_ref();
            token::check_document(d)?;
            layout.doc_offsets.push(layout.tokens.len() as u64);
            token::encode_into(d, &mut layout.tokens);
            layout.tokens.extend_from_slice(&SEPARATOR.to_be_bytes());
            layout.meta_offsets.push(layout.meta.len() as u64);
            if let Some(m) = metadata.get(i) {
                layout.meta.extend(m.bytes().map(|b| if b == b'\n' { b' ' } else { b }));
            }
            layout.meta.push(b'\n');
        }
        layout.doc_offsets.push(layout.tokens.len() as u64);
        layout.meta_offsets.push(layout.meta.len() as u64);
        Ok(layout)
    }
}

pub fn encode_u64s(values: &[u64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Options for [`build_part`].
#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub max_shard_tokens: u64,
    pub width: Option<usize>,
    pub sign: Sign,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { max_shard_tokens: crate::table::MAX_SHARD_TOKENS, width: None, sign: Sign::Plus }
    }
}

/// Build a complete in-memory part.
pub fn build_part<D: AsRef<[Token]>>(docs: &[D], metadata: &[String], opts: BuildOptions) -> Result<Part<Vec<u8>>> {
    let layout = Layout::new(docs, metadata)?;
    let plan = ShardingPlan::new(&layout.doc_offsets, opts.max_shard_tokens)?;
    let mut shards = Vec::with_capacity(plan.shard_count());
    for k in 0..plan.shard_count() {
        let (start, end) = plan.shard(k);
        let (table, width) = build_table(&layout.tokens[start as usize..end as usize], opts.width)?;
        shards.push(ShardTable { start, end, width, table });
    }
    Part::new(
        opts.sign,
        layout.tokens,
        shards,
        DocTable {
            offsets: encode_u64s(&layout.doc_offsets),
            meta: layout.meta,
            meta_offsets: encode_u64s(&layout.meta_offsets),
        },
    )
}

/// Shorthand: a single-part index over `docs` with default options.
pub fn index_of<D: AsRef<[Token]>>(docs: &[D]) -> Result<crate::Index<Vec<u8>>> {
    crate::Index::single(build_part(docs, &[], BuildOptions::default())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn toy_layout() {
        let l = Layout::new(&[vec![1u16, 2, 3, 1, 2], vec![2, 3, 4]], &[]).unwrap();
        assert_eq!(l.tokens.len(), 20);
        assert_eq!(l.doc_offsets, [0, 12, 20]);
        assert_eq!(l.meta, b"\n\n");
    }

    #[test]
    fn rejects_degenerate() {
        let none: [Vec<u16>; 0] = [];
        assert_eq!(Layout::new(&none, &[]), Err(Error::NoDocuments));
        assert_eq!(Layout::new(&[Vec::<u16>::new()], &[]), Err(Error::EmptyDocument));
    }

    #[test]
    fn sharded_part_is_valid() {
        let docs = [vec![1u16, 2, 3, 1, 2], vec![2, 3, 4], vec![9; 40]];
        let part = build_part(&docs, &[], BuildOptions { max_shard_tokens: 7, ..Default::default() }).unwrap();
        assert_eq!(part.shards.len(), 3);
        assert_eq!(part.token_count(), 6 + 4 + 41);
        let sizes: u64 = part.shards.iter().map(|s| s.table.len() as u64).sum();
        assert_eq!(part.index_bytes(), 2 * 51 + sizes);
    }
}
