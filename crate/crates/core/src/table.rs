//! Token-aligned suffix tables: construction, encoding, sharding and
//! verification.
//!
//! A table lists the shard-relative byte offset of every token in its shard,
//! ordered by the byte suffix starting at that offset (up to the end of the
//! shard). Offsets are always even. Each entry is stored little-endian in
//! `P` bytes, where `P = ceil(log2(2·N_s) / 8)`, at least 1.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sais;

/// Bytes per entry for a shard of `tokens` tokens.
pub fn pointer_width(tokens: u64) -> usize {
    let span = tokens.saturating_mul(2);
    if span <= 1 {
        return 1;
    }
    let bits = 64 - (span - 1).leading_zeros() as usize;
    bits.div_ceil(8).max(1)
}

#[inline]
pub fn read_entry(table: &[u8], width: usize, rank: usize) -> u64 {
    let at = rank * width;
    let mut buf = [0u8; 8];
    buf[..width].copy_from_slice(&table[at..at + width]);
    u64::from_le_bytes(buf)
}

#[inline]
fn write_entry(out: &mut [u8], width: usize, rank: usize, value: u64) {
    let at = rank * width;
    out[at..at + width].copy_from_slice(&value.to_le_bytes()[..width]);
}

/// Build the suffix table for one shard's token bytes.
///
/// `width` overrides the entry width; it must be at least the minimal
/// width for the shard and at most 8.
pub fn build_table(shard_bytes: &[u8], width: Option<usize>) -> Result<(Vec<u8>, usize)> {
    if shard_bytes.len() % 2 != 0 {
        return Err(Error::Malformed("token span has odd length".into()));
    }
    let n = shard_bytes.len() / 2;
    if n > MAX_SHARD_TOKENS as usize {
        return Err(Error::InvalidArgument(alloc::format!(
            "shard of {n} tokens exceeds the {MAX_SHARD_TOKENS}-token limit"
        )));
    }
    let min_width = pointer_width(n as u64);
    let width = width.unwrap_or(min_width);
    if width < min_width || width > 8 {
        return Err(Error::InvalidArgument(alloc::format!(
            "pointer width {width} outside [{min_width}, 8]"
        )));
    }
    let tokens = crate::token::decode(shard_bytes);
    let sa = sais::suffix_array(&tokens, 1 << 16);
    drop(tokens);
    let mut out = vec![0u8; n * width];
    for (rank, &pos) in sa.iter().enumerate() {
        write_entry(&mut out, width, rank, 2 * pos as u64);
    }
    Ok((out, width))
}

/// Largest shard the builder accepts.
pub const MAX_SHARD_TOKENS: u64 = (1 << 31) - 1;

/// Document-aligned shard boundaries over a token array.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShardingPlan {
    pub max_tokens_per_shard: u64,
    /// Byte offsets; shard `k` covers `boundaries[k]..boundaries[k + 1]`.
    pub boundaries: Vec<u64>,
}

impl ShardingPlan {
    /// Pack whole documents greedily into shards of at most `max_tokens`
    /// tokens (separators included). A single document larger than the
    /// limit becomes a shard of its own.
    ///
    /// `doc_offsets` holds each document's start byte plus the final
    /// sentinel (the token array size).
    pub fn new(doc_offsets: &[u64], max_tokens: u64) -> Result<Self> {
        if max_tokens == 0 {
            return Err(Error::InvalidArgument("max tokens per shard must be positive".into()));
        }
        if doc_offsets.len() < 2 {
            return Err(Error::NoDocuments);
        }
        let max_tokens = max_tokens.min(MAX_SHARD_TOKENS);
        let limit = max_tokens * 2;
        let mut boundaries = vec![doc_offsets[0]];
        let mut shard_start = doc_offsets[0];
        for w in doc_offsets.windows(2) {
            let (start, end) = (w[0], w[1]);
            if end - shard_start > limit && start > shard_start {
                boundaries.push(start);
                shard_start = start;
            }
        }
        boundaries.push(*doc_offsets.last().unwrap());
        let plan = Self { max_tokens_per_shard: max_tokens, boundaries };
        for k in 0..plan.shard_count() {
            let (s, e) = plan.shard(k);
            if (e - s) / 2 > MAX_SHARD_TOKENS {
                return Err(Error::InvalidArgument(alloc::format!(
                    "document at byte {s} exceeds the {MAX_SHARD_TOKENS}-token shard limit"
                )));
            }
        }
        Ok(plan)
    }

    pub fn shard_count(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn shard(&self, k: usize) -> (u64, u64) {
        (self.boundaries[k], self.boundaries[k + 1])
    }
}

/// First problem found by [`verify_table`].
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Violation {
    /// Table length is not `N_s · P`.
    Length { expected: u64, actual: u64 },
    /// Entry is odd, out of range, or repeated.
    NotPermutation { rank: u64, value: u64 },
    /// Suffix at `rank` sorts after the one at `rank + 1`.
    Unsorted { rank: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VerifyReport {
    pub entries: u64,
    pub pairs_checked: u64,
    pub full: bool,
    pub violation: Option<Violation>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

/// Shards up to this many tokens get every adjacent pair checked.
pub const FULL_CHECK_LIMIT: u64 = 1 << 22;

/// Check the permutation property (always in full) and adjacent-pair
/// ordering (in full up to `full_limit` entries, otherwise on `samples`
/// seeded random pairs).
pub fn verify_table(
    shard_bytes: &[u8],
    table: &[u8],
    width: usize,
    full_limit: u64,
    samples: u64,
    seed: u64,
) -> VerifyReport {
    let n = (shard_bytes.len() / 2) as u64;
    let mut report = VerifyReport { entries: n, pairs_checked: 0, full: n <= full_limit, violation: None };
    if table.len() as u64 != n * width as u64 {
        report.violation = Some(Violation::Length { expected: n * width as u64, actual: table.len() as u64 });
        return report;
    }
    let mut seen = vec![0u64; (n as usize).div_ceil(64)];
    for rank in 0..n as usize {
        let v = read_entry(table, width, rank);
        let idx = v / 2;
        if v % 2 != 0 || idx >= n || seen[idx as usize / 64] >> (idx % 64) & 1 == 1 {
            report.violation = Some(Violation::NotPermutation { rank: rank as u64, value: v });
            return report;
        }
        seen[idx as usize / 64] |= 1 << (idx % 64);
    }
    drop(seen);
    if n < 2 {
        return report;
    }
    let in_order = |rank: usize| {
        let a = read_entry(table, width, rank) as usize;
        let b = read_entry(table, width, rank + 1) as usize;
        shard_bytes[a..].cmp(&shard_bytes[b..]) == Ordering::Less
    };
    if report.full {
        for rank in 0..n as usize - 1 {
            report.pairs_checked += 1;
            if !in_order(rank) {
                report.violation = Some(Violation::Unsorted { rank: rank as u64 });
                return report;
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ranks: Vec<usize> = (0..samples).map(|_| rng.gen_range(0..n as usize - 1)).collect();
        ranks.sort_unstable();
        for rank in ranks {
            report.pairs_checked += 1;
            if !in_order(rank) {
                report.violation = Some(Violation::Unsorted { rank: rank as u64 });
                return report;
            }
        }
    }
    report
}
