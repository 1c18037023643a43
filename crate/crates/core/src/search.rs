//! Segment search, counting, occurrence positions and document lookup.
//!
//! Every suffix that starts with a query occupies one contiguous run of
//! ranks in each shard's table. Its two ends are found by binary search,
//! comparing at most `2·len(q)` bytes per probe.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::index::{Index, Part, Sign};
use crate::table::read_entry;
use crate::token::{self, Token, SEPARATOR};

/// Half-open rank interval `[lo, hi)` of one shard's table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SegmentRange {
    pub part: usize,
    pub shard: usize,
    pub lo: u64,
    pub hi: u64,
}

impl SegmentRange {
    pub fn width(&self) -> u64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, other: &SegmentRange) -> bool {
        self.part == other.part && self.shard == other.shard && self.lo <= other.lo && other.hi <= self.hi
    }
}

/// The segments of one query, one per shard of every part.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Segments {
    pub query_len: usize,
    pub ranges: Vec<SegmentRange>,
}

/// A byte offset in one part's token array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Location {
    pub part: usize,
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Positions {
    /// Occurrences across all additive parts.
    pub total: u64,
    /// All occurrences when `total <= limit`, otherwise a seeded sample;
    /// sorted by location.
    pub locations: Vec<Location>,
}

/// Occurrences of one query term inside a document.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TermMatch {
    pub clause: usize,
    pub term: usize,
    /// Token offsets relative to the document start.
    pub positions: Vec<u64>,
}

/// A document of one part.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DocRef {
    pub part: usize,
    pub doc: u64,
    /// Byte span `[start, end)` in the token array, separator included.
    pub start: u64,
    pub end: u64,
    pub metadata: String,
    pub matches: Vec<TermMatch>,
}

impl DocRef {
    /// Number of tokens in the document, separator excluded.
    pub fn token_len(&self) -> u64 {
        (self.end - self.start) / 2 - 1
    }
}

/// Order a suffix against `q`, looking at no more than `q.len()` bytes.
/// A suffix that ends before `q` does sorts first.
#[inline]
fn cmp_prefix(suffix: &[u8], q: &[u8]) -> Ordering {
    let n = suffix.len().min(q.len());
    match suffix[..n].cmp(&q[..n]) {
        Ordering::Equal if n < q.len() => Ordering::Less,
        o => o,
    }
}

impl<B: AsRef<[u8]>> Index<B> {
    #[inline]
    fn suffix<'p>(&self, part: &'p Part<B>, shard: usize, rank: u64) -> &'p [u8] {
        let s = &part.shards[shard];
        let rel = read_entry(s.table.as_ref(), s.width, rank as usize);
        &part.tokens.as_ref()[(s.start + rel) as usize..s.end as usize]
    }

    /// Absolute byte offset of the suffix at `rank`.
    #[inline]
    pub fn suffix_offset(&self, part: usize, shard: usize, rank: u64) -> u64 {
        let s = &self.parts()[part].shards[shard];
        s.start + read_entry(s.table.as_ref(), s.width, rank as usize)
    }

    /// Segments of the empty query: every rank of every shard.
    pub fn full_segments(&self) -> Segments {
        let mut ranges = Vec::new();
        for (p, part) in self.parts().iter().enumerate() {
            for (k, s) in part.shards.iter().enumerate() {
                ranges.push(SegmentRange { part: p, shard: k, lo: 0, hi: s.tokens() });
            }
        }
        Segments { query_len: 0, ranges }
    }

    /// Locate the segment of `q` in every shard.
    ///
    /// With a `hint` (the segments of a prefix of `q`), each search is
    /// confined to the hinted ranks. The empty query yields full segments.
    pub fn find_segments(&self, q: &[Token], hint: Option<&Segments>) -> Result<Segments> {
        token::check_context(q)?;
        self.locate_segments(q, hint)
    }

    /// Like [`find_segments`](Self::find_segments) but `q` may end with the
    /// separator, matching occurrences of the rest at a document end.
    pub fn find_segments_to_end(&self, q: &[Token], hint: Option<&Segments>) -> Result<Segments> {
        let body = match q.split_last() {
            Some((&token::SEPARATOR, body)) => body,
            _ => q,
        };
        token::check_context(body)?;
        self.locate_segments(q, hint)
    }

    fn locate_segments(&self, q: &[Token], hint: Option<&Segments>) -> Result<Segments> {
        self.tally().count_ops.fetch_add(1, core::sync::atomic::Ordering::Relaxed);
        let base = match hint {
            Some(h) => {
                if h.query_len > q.len() || h.ranges.len() != self.parts().iter().map(|p| p.shards.len()).sum::<usize>() {
                    return Err(Error::InvalidArgument("hint does not belong to a prefix of the query".into()));
                }
                h.clone()
            }
            None => self.full_segments(),
        };
        if q.is_empty() {
            return Ok(base);
        }
        let qb = token::encode(q);
        let ranges = base
            .ranges
            .iter()
            .map(|r| {
                let (lo, hi) = self.search_range(r.part, r.shard, &qb, r.lo, r.hi);
                SegmentRange { lo, hi, ..*r }
            })
            .collect();
        Ok(Segments { query_len: q.len(), ranges })
    }

    fn search_range(&self, p: usize, shard: usize, qb: &[u8], lo: u64, hi: u64) -> (u64, u64) {
        let part = &self.parts()[p];
        let n_s = part.shards[shard].tokens();
        self.tally().segment_searches.fetch_add(1, core::sync::atomic::Ordering::Relaxed);

        // first rank whose suffix is not below q
        let (mut a, mut b, mut cmps) = (lo, hi, 0u64);
        while a < b {
            let mid = a + (b - a) / 2;
            cmps += 1;
            if cmp_prefix(self.suffix(part, shard, mid), qb) == Ordering::Less {
                a = mid + 1;
            } else {
                b = mid;
            }
        }
        self.tally().record_boundary(cmps, n_s);
        let first = a;

        // first rank whose suffix no longer starts with q
        let (mut a, mut b, mut cmps) = (first, hi, 0u64);
        while a < b {
            let mid = a + (b - a) / 2;
            cmps += 1;
            if cmp_prefix(self.suffix(part, shard, mid), qb) == Ordering::Equal {
                a = mid + 1;
            } else {
                b = mid;
            }
        }
        self.tally().record_boundary(cmps, n_s);
        (first, a)
    }

    /// Signed occurrence total over a set of segments.
    pub fn count_segments(&self, segs: &Segments) -> Result<u64> {
        let total: i128 = segs
            .ranges
            .iter()
            .map(|r| self.parts()[r.part].sign.apply(r.width()))
            .sum();
        u64::try_from(total).map_err(|_| Error::NegativeCount(total))
    }

    /// Occurrences of `q` in the composed corpus; the empty query counts
    /// every token, separators included.
    pub fn count(&self, q: &[Token]) -> Result<u64> {
        let segs = self.find_segments(q, None)?;
        self.count_segments(&segs)
    }

    /// Token following the occurrence at `rank` (possibly the separator).
    #[inline]
    pub fn next_token(&self, r: &SegmentRange, rank: u64, query_len: usize) -> Token {
        let part = &self.parts()[r.part];
        let suffix = self.suffix(part, r.shard, rank);
        token::token_at(suffix, 2 * query_len)
    }

    /// Split one range into runs sharing the same following token.
    fn continuation_runs(&self, r: &SegmentRange, query_len: usize, mut visit: impl FnMut(Token, u64)) {
        let mut rank = r.lo;
        while rank < r.hi {
            let t = self.next_token(r, rank, query_len);
            // first rank in (rank, hi) whose next token exceeds t
            let (mut a, mut b) = (rank + 1, r.hi);
            while a < b {
                let mid = a + (b - a) / 2;
                if self.next_token(r, mid, query_len) <= t {
                    a = mid + 1;
                } else {
                    b = mid;
                }
            }
            visit(t, a - rank);
            rank = a;
        }
    }

    /// Signed count of every token following the query, zero totals dropped.
    pub fn continuations(&self, segs: &Segments) -> Result<Vec<(Token, u64)>> {
        let mut acc: BTreeMap<Token, i128> = BTreeMap::new();
        for r in segs.ranges.iter().filter(|r| !r.is_empty()) {
            let sign = self.parts()[r.part].sign;
            self.continuation_runs(r, segs.query_len, |t, c| {
                *acc.entry(t).or_insert(0) += sign.apply(c);
            });
        }
        acc.into_iter()
            .filter(|&(_, c)| c != 0)
            .map(|(t, c)| u64::try_from(c).map(|c| (t, c)).map_err(|_| Error::NegativeCount(c)))
            .collect()
    }

    /// The single token every occurrence continues with, if there is one.
    /// Reads two table entries per non-empty range when every part is
    /// additive; signed compositions fall back to the full enumeration.
    pub fn sole_continuation(&self, segs: &Segments) -> Result<Option<Token>> {
        if self.parts().iter().any(|p| p.sign == Sign::Minus) {
            let c = self.continuations(segs)?;
            return Ok(if c.len() == 1 { Some(c[0].0) } else { None });
        }
        let mut sole: Option<Token> = None;
        for r in segs.ranges.iter().filter(|r| !r.is_empty()) {
            let first = self.next_token(r, r.lo, segs.query_len);
            let last = self.next_token(r, r.hi - 1, segs.query_len);
            if first != last || sole.is_some_and(|s| s != first) {
                return Ok(None);
            }
            sole = Some(first);
        }
        Ok(sole)
    }

    fn additive_ranges<'s>(&'s self, segs: &'s Segments) -> impl Iterator<Item = &'s SegmentRange> + 's {
        segs.ranges.iter().filter(move |r| self.parts()[r.part].sign == Sign::Plus && !r.is_empty())
    }

    /// Occurrence locations of `q` in the additive parts.
    ///
    /// When there are more than `limit`, a uniform sample of `limit`
    /// distinct occurrences is drawn with `ChaCha8Rng::seed_from_u64(seed)`
    /// (`rand::seq::index::sample` over the occurrences in segment order).
    pub fn positions(&self, q: &[Token], limit: usize, seed: u64) -> Result<Positions> {
        token::check_query(q)?;
        if limit == 0 {
            return Err(Error::InvalidArgument("limit must be at least 1".into()));
        }
        let segs = self.find_segments(q, None)?;
        let ranges: Vec<&SegmentRange> = self.additive_ranges(&segs).collect();
        let total: u64 = ranges.iter().map(|r| r.width()).sum();
        let mut locations = Vec::new();
        if total <= limit as u64 {
            for r in &ranges {
                for rank in r.lo..r.hi {
                    locations.push(Location { part: r.part, offset: self.suffix_offset(r.part, r.shard, rank) });
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picks: Vec<u64> = index::sample(&mut rng, total as usize, limit).into_iter().map(|i| i as u64).collect();
            picks.sort_unstable();
            let mut it = ranges.iter();
            let mut cur = it.next();
            let mut skipped = 0u64;
            for i in picks {
                while let Some(r) = cur {
                    if i < skipped + r.width() {
                        break;
                    }
                    skipped += r.width();
                    cur = it.next();
                }
                let r = cur.expect("sample index within total");
                let rank = r.lo + (i - skipped);
                locations.push(Location { part: r.part, offset: self.suffix_offset(r.part, r.shard, rank) });
            }
        }
        locations.sort_unstable();
        Ok(Positions { total, locations })
    }

    /// The document enclosing a token.
    pub fn doc_of(&self, part: usize, offset: u64) -> Result<DocRef> {
        let p = self
            .parts()
            .get(part)
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("no part {part}")))?;
        if offset % 2 != 0 || offset >= p.tokens.as_ref().len() as u64 {
            return Err(Error::OffsetOutOfRange(offset));
        }
        let d = p.docs.locate(offset).ok_or(Error::OffsetOutOfRange(offset))?;
        self.doc_ref(part, d, offset)
    }

    fn doc_ref(&self, part: usize, d: u64, offset: u64) -> Result<DocRef> {
        let p = &self.parts()[part];
        let (start, end) = (p.docs.start(d), p.docs.start(d + 1));
        if offset + 2 >= end {
            return Err(Error::NotInDocument(offset));
        }
        Ok(DocRef { part, doc: d, start, end, metadata: p.docs.metadata(d), matches: Vec::new() })
    }

    /// Document `d` of `part`, looked up by ordinal.
    pub fn document(&self, part: usize, d: u64) -> Result<DocRef> {
        let p = self
            .parts()
            .get(part)
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("no part {part}")))?;
        if d >= p.docs.len() {
            return Err(Error::InvalidArgument(alloc::format!("no document {d}")));
        }
        self.doc_ref(part, d, p.docs.start(d))
    }

    /// Tokens of a document, separator excluded.
    pub fn document_tokens(&self, doc: &DocRef) -> Vec<Token> {
        let bytes = &self.parts()[doc.part].tokens.as_ref()[doc.start as usize..doc.end as usize - 2];
        token::decode(bytes)
    }

    /// Byte suffix at an absolute offset, up to the end of the token array.
    pub fn tokens_from(&self, part: usize, offset: u64, max_tokens: usize) -> Vec<Token> {
        let bytes = self.parts()[part].tokens.as_ref();
        let end = (offset as usize + 2 * max_tokens).min(bytes.len());
        let toks = token::decode(&bytes[offset as usize..end]);
        let stop = toks.iter().position(|&t| t == SEPARATOR).unwrap_or(toks.len());
        toks[..stop].to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::{build_part, index_of, BuildOptions};
    use alloc::vec;
    use infgram_testkit::{naive_byte_positions, naive_count, random_docs, random_query, toy_corpus, ChaCha8Rng, SeedableRng};

    #[test]
    fn toy_counts() {
        let idx = index_of(&toy_corpus()).unwrap();
        assert_eq!(idx.count(&[2]).unwrap(), 3);
        assert_eq!(idx.count(&[2, 3]).unwrap(), 2);
        assert_eq!(idx.count(&[1, 2, 3, 1, 2]).unwrap(), 1);
        assert_eq!(idx.count(&[5]).unwrap(), 0);
        assert_eq!(idx.count(&[]).unwrap(), 10);
        assert_eq!(idx.count(&[2, SEPARATOR]), Err(Error::SeparatorInQuery));
    }

    #[test]
    fn absent_query_has_empty_segments() {
        let idx = index_of(&toy_corpus()).unwrap();
        let segs = idx.find_segments(&[5], None).unwrap();
        assert!(segs.ranges.iter().all(|r| r.is_empty()));
    }

    #[test]
    fn hinted_search_matches_unhinted() {
        let idx = index_of(&toy_corpus()).unwrap();
        let hint = idx.find_segments(&[1, 2], None).unwrap();
        let a = idx.find_segments(&[1, 2, 3], Some(&hint)).unwrap();
        let b = idx.find_segments(&[1, 2, 3], None).unwrap();
        assert_eq!(a, b);
        assert!(hint.ranges[0].contains(&a.ranges[0]));
    }

    #[test]
    fn toy_positions() {
        let idx = index_of(&toy_corpus()).unwrap();
        let p = idx.positions(&[2, 3], 10, 0).unwrap();
        assert_eq!(p.total, 2);
        let offs: Vec<u64> = p.locations.iter().map(|l| l.offset).collect();
        assert_eq!(offs, [2, 12]);
        assert!(idx.positions(&[9], 10, 0).unwrap().locations.is_empty());
        assert!(idx.positions(&[2], 0, 0).is_err());
    }

    #[test]
    fn sampled_positions_are_deterministic() {
        let docs = vec![vec![7u16; 100]];
        let idx = index_of(&docs).unwrap();
        let a = idx.positions(&[7], 10, 42).unwrap();
        let b = idx.positions(&[7], 10, 42).unwrap();
        assert_eq!(a.total, 100);
        assert_eq!(a.locations.len(), 10);
        assert_eq!(a, b);
        let mut offs: Vec<u64> = a.locations.iter().map(|l| l.offset).collect();
        offs.dedup();
        assert_eq!(offs.len(), 10);
        assert!(offs.iter().all(|o| o % 2 == 0 && *o < 200));
    }

    #[test]
    fn toy_doc_lookup() {
        let idx = index_of(&toy_corpus()).unwrap();
        let a = idx.doc_of(0, 2).unwrap();
        assert_eq!((a.doc, a.start, a.end), (0, 0, 12));
        assert_eq!(idx.document_tokens(&a), [1, 2, 3, 1, 2]);
        let b = idx.doc_of(0, 12).unwrap();
        assert_eq!((b.doc, b.start, b.end), (1, 12, 20));
        assert_eq!(idx.doc_of(0, 10), Err(Error::NotInDocument(10)));
        assert_eq!(idx.doc_of(0, 20), Err(Error::OffsetOutOfRange(20)));
        assert_eq!(idx.doc_of(0, 3), Err(Error::OffsetOutOfRange(3)));
    }

    #[test]
    fn toy_continuations() {
        let idx = index_of(&toy_corpus()).unwrap();
        let segs = idx.find_segments(&[2], None).unwrap();
        assert_eq!(idx.continuations(&segs).unwrap(), [(3, 2), (SEPARATOR, 1)]);
        assert_eq!(idx.sole_continuation(&segs).unwrap(), None);
        let segs = idx.find_segments(&[1, 2, 3], None).unwrap();
        assert_eq!(idx.sole_continuation(&segs).unwrap(), Some(1));
    }

    #[test]
    fn sharded_counts_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &vocab in &[3u16, 50] {
            let docs = random_docs(&mut rng, 3000, vocab, 40);
            let part = build_part(&docs, &[], BuildOptions { max_shard_tokens: 500, ..Default::default() }).unwrap();
            assert!(part.shards.len() > 3);
            let idx = crate::Index::single(part).unwrap();
            for _ in 0..300 {
                let q = random_query(&mut rng, &docs, vocab, 8);
                assert_eq!(idx.count(&q).unwrap(), naive_count(&docs, &q), "{q:?}");
                let p = idx.positions(&q, usize::MAX, 0).unwrap();
                let offs: Vec<u64> = p.locations.iter().map(|l| l.offset).collect();
                assert_eq!(offs, naive_byte_positions(&docs, &q));
            }
            let t = idx.tally();
            assert_eq!(t.boundary_overruns.load(core::sync::atomic::Ordering::Relaxed), 0);
        }
    }

    #[test]
    fn difference_going_negative_is_an_error() {
        let a = build_part(&[vec![1u16, 2]], &[], BuildOptions::default()).unwrap();
        let b = build_part(&[vec![1u16, 2, 1]], &[], BuildOptions { sign: Sign::Minus, ..Default::default() });
        let b = b.unwrap();
        // N: 3 - 4 < 0, so the composition itself is rejected
        assert!(matches!(crate::Index::new(vec![a, b]), Err(Error::NegativeCount(_))));

        let a = build_part(&[vec![1u16, 2, 2, 2, 2]], &[], BuildOptions::default()).unwrap();
        let b = build_part(&[vec![1u16, 1]], &[], BuildOptions { sign: Sign::Minus, ..Default::default() }).unwrap();
        let idx = crate::Index::new(vec![a, b]).unwrap();
        assert_eq!(idx.count(&[2]).unwrap(), 4);
        assert_eq!(idx.count(&[1]), Err(Error::NegativeCount(-1)));
    }
}
