//! Index components and signed multi-part composition.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::table;

/// Whether a part's counts are added to or subtracted from the total.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn apply(self, v: u64) -> i128 {
        match self {
            Sign::Plus => v as i128,
            Sign::Minus => -(v as i128),
        }
    }
}

/// One shard: a byte span of the part's token array plus its suffix table.
#[derive(Debug)]
pub struct ShardTable<B> {
    pub start: u64,
    pub end: u64,
    pub width: usize,
    pub table: B,
}

impl<B: AsRef<[u8]>> ShardTable<B> {
    pub fn tokens(&self) -> u64 {
        (self.end - self.start) / 2
    }
}

/// Document offsets and metadata for one part.
#[derive(Debug)]
pub struct DocTable<B> {
    /// `D + 1` little-endian u64 start offsets; the last is the sentinel.
    pub offsets: B,
    /// Newline-terminated metadata lines.
    pub meta: B,
    /// `D + 1` little-endian u64 offsets into `meta`.
    pub meta_offsets: B,
}

#[inline]
pub(crate) fn read_u64(bytes: &[u8], i: usize) -> u64 {
    let mut b = [0u8; 8];
    b.copy_from_slice(&bytes[i * 8..i * 8 + 8]);
    u64::from_le_bytes(b)
}

impl<B: AsRef<[u8]>> DocTable<B> {
    pub fn len(&self) -> u64 {
        (self.offsets.as_ref().len() / 8).saturating_sub(1) as u64
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Byte offset where document `d` starts (`d == len()` gives the sentinel).
    pub fn start(&self, d: u64) -> u64 {
        read_u64(self.offsets.as_ref(), d as usize)
    }

    pub fn metadata(&self, d: u64) -> String {
        let mo = self.meta_offsets.as_ref();
        let (a, b) = (read_u64(mo, d as usize) as usize, read_u64(mo, d as usize + 1) as usize);
        let line = &self.meta.as_ref()[a..b];
        let line = line.strip_suffix(b"\n").unwrap_or(line);
        String::from_utf8_lossy(line).into_owned()
    }

    /// Ordinal of the document whose byte span contains `offset`, found by
    /// binary search over the offsets (`O(log D)` probes).
    pub fn locate(&self, offset: u64) -> Option<u64> {
        let d = self.len();
        if d == 0 || offset < self.start(0) || offset >= self.start(d) {
            return None;
        }
        let (mut lo, mut hi) = (0u64, d);
        // invariant: start(lo) <= offset < start(hi)
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.start(mid) <= offset {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    }
}

/// One index directory: a token array, its shards and its document table.
#[derive(Debug)]
pub struct Part<B> {
    pub sign: Sign,
    pub tokens: B,
    pub shards: Vec<ShardTable<B>>,
    pub docs: DocTable<B>,
}

impl<B: AsRef<[u8]>> Part<B> {
    /// Assemble a part, checking that every component has a consistent size.
    pub fn new(sign: Sign, tokens: B, shards: Vec<ShardTable<B>>, docs: DocTable<B>) -> Result<Self> {
        let part = Self { sign, tokens, shards, docs };
        part.validate()?;
        Ok(part)
    }

    fn validate(&self) -> Result<()> {
        let tokens = self.tokens.as_ref();
        if tokens.is_empty() || tokens.len() % 2 != 0 {
            return Err(Error::Malformed(format!("token array has {} bytes", tokens.len())));
        }
        if tokens[tokens.len() - 2..] != [0xFF, 0xFF] {
            return Err(Error::Malformed("token array does not end with a separator".into()));
        }
        let mut cursor = 0u64;
        for (k, s) in self.shards.iter().enumerate() {
            if s.start != cursor || s.end <= s.start || s.end > tokens.len() as u64 || s.start % 2 != 0 || s.end % 2 != 0 {
                return Err(Error::Malformed(format!("shard {k} span {}..{} is not contiguous", s.start, s.end)));
            }
            if s.width == 0 || s.width > 8 || s.width < table::pointer_width(s.tokens()) {
                return Err(Error::Malformed(format!("shard {k} pointer width {} invalid", s.width)));
            }
            let expect = s.tokens() * s.width as u64;
            if s.table.as_ref().len() as u64 != expect {
                return Err(Error::Malformed(format!(
                    "shard {k} table has {} bytes, expected {expect}",
                    s.table.as_ref().len()
                )));
            }
            cursor = s.end;
        }
        if cursor != tokens.len() as u64 {
            return Err(Error::Malformed("shards do not cover the token array".into()));
        }
        let offs = self.docs.offsets.as_ref();
        if offs.len() % 8 != 0 || offs.len() < 16 {
            return Err(Error::Malformed("document offsets file has a bad size".into()));
        }
        let d = self.docs.len();
        if self.docs.start(0) != 0 || self.docs.start(d) != tokens.len() as u64 {
            return Err(Error::Malformed("document offsets do not span the token array".into()));
        }
        let mo = self.docs.meta_offsets.as_ref();
        if mo.len() as u64 != (d + 1) * 8 || read_u64(mo, d as usize) != self.docs.meta.as_ref().len() as u64 {
            return Err(Error::Malformed("metadata offsets do not match the metadata file".into()));
        }
        Ok(())
    }

    pub fn token_count(&self) -> u64 {
        self.tokens.as_ref().len() as u64 / 2
    }

    /// Bytes of token array plus suffix tables.
    pub fn index_bytes(&self) -> u64 {
        self.tokens.as_ref().len() as u64
            + self.shards.iter().map(|s| s.table.as_ref().len() as u64).sum::<u64>()
    }

    /// Index bytes plus document offset and metadata files.
    pub fn total_bytes(&self) -> u64 {
        self.index_bytes()
            + (self.docs.offsets.as_ref().len() + self.docs.meta.as_ref().len() + self.docs.meta_offsets.as_ref().len())
                as u64
    }
}

/// Operation counters, shared by all queries on an index.
#[derive(Debug, Default)]
pub struct Tally {
    /// Per-shard segment searches (one per shard per `find_segments`).
    pub segment_searches: AtomicU64,
    /// Calls to `find_segments` (a "count operation").
    pub count_ops: AtomicU64,
    /// Suffix comparisons made by boundary searches.
    pub comparisons: AtomicU64,
    /// Most comparisons spent on a single boundary.
    pub max_boundary_comparisons: AtomicU64,
    /// Boundary searches that exceeded `ceil(log2 N_s) + 2` comparisons.
    pub boundary_overruns: AtomicU64,
}

impl Tally {
    pub fn count_ops(&self) -> u64 {
        self.count_ops.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.segment_searches.store(0, Ordering::Relaxed);
        self.count_ops.store(0, Ordering::Relaxed);
        self.comparisons.store(0, Ordering::Relaxed);
        self.max_boundary_comparisons.store(0, Ordering::Relaxed);
        self.boundary_overruns.store(0, Ordering::Relaxed);
    }

    pub(crate) fn record_boundary(&self, comparisons: u64, shard_tokens: u64) {
        self.comparisons.fetch_add(comparisons, Ordering::Relaxed);
        self.max_boundary_comparisons.fetch_max(comparisons, Ordering::Relaxed);
        if comparisons > boundary_budget(shard_tokens) {
            self.boundary_overruns.fetch_add(1, Ordering::Relaxed);
        }
    }
}

/// `ceil(log2 n) + 2`, the comparison budget for one boundary search.
pub fn boundary_budget(n: u64) -> u64 {
    let ceil_log2 = if n <= 1 { 0 } else { 64 - (n - 1).leading_zeros() as u64 };
    ceil_log2 + 2
}

/// Default per-term occurrence ceiling for document search.
pub const DEFAULT_TERM_CEILING: u64 = 500_000;

/// A signed composition of parts, queried as a single corpus.
#[derive(Debug)]
pub struct Index<B> {
    parts: Vec<Part<B>>,
    tally: Tally,
    term_ceiling: u64,
}

/// Corpus statistics.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IndexStats {
    pub tokens: i128,
    pub documents: i128,
    pub shards: usize,
    pub index_bytes: u64,
    pub bytes_on_disk: u64,
    pub bytes_per_token: f64,
    pub ngram_lower_bound: f64,
}

/// Lower bound `N² / (2D)` on the number of distinct within-document n-grams.
pub fn ngram_lower_bound(tokens: f64, documents: f64) -> f64 {
    if documents <= 0.0 {
        return 0.0;
    }
    tokens * tokens / (2.0 * documents)
}

impl<B: AsRef<[u8]>> Index<B> {
    pub fn new(parts: Vec<Part<B>>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidArgument("an index needs at least one part".into()));
        }
        if parts.iter().any(|p| p.shards.is_empty()) {
            return Err(Error::Malformed("part has no suffix tables".into()));
        }
        let index = Self { parts, tally: Tally::default(), term_ceiling: DEFAULT_TERM_CEILING };
        match index.total_tokens() {
            0 => return Err(Error::NoDocuments),
            n if n < 0 => return Err(Error::NegativeCount(n)),
            _ => {}
        }
        Ok(index)
    }

    pub fn single(part: Part<B>) -> Result<Self> {
        Self::new(alloc::vec![part])
    }

    pub fn with_term_ceiling(mut self, ceiling: u64) -> Self {
        self.term_ceiling = ceiling;
        self
    }

    pub fn term_ceiling(&self) -> u64 {
        self.term_ceiling
    }

    pub fn parts(&self) -> &[Part<B>] {
        &self.parts
    }

    pub fn tally(&self) -> &Tally {
        &self.tally
    }

    /// Signed token count, the count of the empty n-gram.
    pub fn total_tokens(&self) -> i128 {
        self.parts.iter().map(|p| p.sign.apply(p.token_count())).sum()
    }

    pub fn total_documents(&self) -> i128 {
        self.parts.iter().map(|p| p.sign.apply(p.docs.len())).sum()
    }

    pub fn stats(&self) -> IndexStats {
        let tokens = self.total_tokens();
        let documents = self.total_documents();
        let index_bytes: u64 = self.parts.iter().map(|p| p.index_bytes()).sum();
        let raw_tokens: u64 = self.parts.iter().map(|p| p.token_count()).sum();
        IndexStats {
            tokens,
            documents,
            shards: self.parts.iter().map(|p| p.shards.len()).sum(),
            index_bytes,
            bytes_on_disk: self.parts.iter().map(|p| p.total_bytes()).sum(),
            bytes_per_token: index_bytes as f64 / raw_tokens as f64,
            ngram_lower_bound: ngram_lower_bound(tokens as f64, documents as f64),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_bound_formula() {
        assert_eq!(ngram_lower_bound(10.0, 2.0), 25.0);
        let big = ngram_lower_bound(5e12, 6e9);
        assert!((big - 2.0833e15).abs() / 2.0833e15 < 1e-3);
        assert_eq!(libm::round(big / 1e15), 2.0);
    }

    #[test]
    fn budgets() {
        assert_eq!(boundary_budget(1), 2);
        assert_eq!(boundary_budget(2), 3);
        assert_eq!(boundary_budget(6), 5);
        assert_eq!(boundary_budget(8), 5);
        assert_eq!(boundary_budget(9), 6);
    }
}
