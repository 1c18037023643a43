//! Brute-force reference implementations used as test oracles.
//!
//! Nothing here shares code with the engine: every function materializes
//! the corpus as plain token vectors and scans or sorts it directly.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

pub use rand_chacha::ChaCha8Rng;
pub use rand::SeedableRng;

/// End-of-document token.
pub const EOD: u16 = 0xFFFF;

/// Concatenate documents, terminating each with [`EOD`].
pub fn flatten(docs: &[Vec<u16>]) -> Vec<u16> {
    let mut out = Vec::new();
    for d in docs {
        out.extend_from_slice(d);
        out.push(EOD);
    }
    out
}

/// Big-endian byte image of a flattened corpus.
pub fn token_bytes(docs: &[Vec<u16>]) -> Vec<u8> {
    flatten(docs).iter().flat_map(|t| t.to_be_bytes()).collect()
}

/// Sort every suffix start of `text` by comparing the materialized suffixes.
pub fn naive_suffix_array<T: Ord>(text: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..text.len()).collect();
    idx.sort_by(|&a, &b| text[a..].cmp(&text[b..]));
    idx
}

/// Token-aligned suffix array of a token run, as byte offsets.
pub fn naive_token_suffix_array(tokens: &[u16]) -> Vec<u64> {
    let bytes: Vec<u8> = tokens.iter().flat_map(|t| t.to_be_bytes()).collect();
    let mut offs: Vec<u64> = (0..tokens.len() as u64).map(|i| 2 * i).collect();
    offs.sort_by(|&a, &b| bytes[a as usize..].cmp(&bytes[b as usize..]));
    offs
}

/// Token offsets in the flattened corpus where `q` starts.
pub fn naive_token_positions(docs: &[Vec<u16>], q: &[u16]) -> Vec<usize> {
    let flat = flatten(docs);
    if q.is_empty() {
        return (0..flat.len()).collect();
    }
    if q.len() > flat.len() {
        return Vec::new();
    }
    (0..=flat.len() - q.len())
        .filter(|&i| &flat[i..i + q.len()] == q)
        .collect()
}

/// Number of occurrences of `q`; the empty query matches every token.
pub fn naive_count(docs: &[Vec<u16>], q: &[u16]) -> u64 {
    naive_token_positions(docs, q).len() as u64
}

/// Byte offsets (2 per token) of every occurrence of `q`.
pub fn naive_byte_positions(docs: &[Vec<u16>], q: &[u16]) -> Vec<u64> {
    naive_token_positions(docs, q)
        .into_iter()
        .map(|p| 2 * p as u64)
        .collect()
}

/// Counts of each token that follows an occurrence of `q` (EOD included).
pub fn naive_continuations(docs: &[Vec<u16>], q: &[u16]) -> BTreeMap<u16, u64> {
    let flat = flatten(docs);
    let mut out = BTreeMap::new();
    for p in naive_token_positions(docs, q) {
        if let Some(&t) = flat.get(p + q.len()) {
            *out.entry(t).or_insert(0) += 1;
        }
    }
    out
}

/// Longest suffix of `ctx` whose count is at least `min_count` (0 when none).
pub fn naive_longest_suffix(docs: &[Vec<u16>], ctx: &[u16], min_count: u64) -> usize {
    (0..=ctx.len())
        .rev()
        .find(|&l| l == 0 || naive_count(docs, &ctx[ctx.len() - l..]) >= min_count)
        .unwrap_or(0)
}

/// Ordinals of documents that contain `q`.
pub fn naive_docs_containing(docs: &[Vec<u16>], q: &[u16]) -> BTreeSet<usize> {
    docs.iter()
        .enumerate()
        .filter(|(_, d)| q.len() <= d.len() && d.windows(q.len()).any(|w| w == q))
        .map(|(i, _)| i)
        .collect()
}

/// Documents where every clause has at least one term present.
pub fn naive_cnf(docs: &[Vec<u16>], clauses: &[Vec<Vec<u16>>]) -> BTreeSet<usize> {
    (0..docs.len())
        .filter(|&i| {
            clauses.iter().all(|clause| {
                clause.iter().any(|t| {
                    t.len() <= docs[i].len() && docs[i].windows(t.len()).any(|w| w == &t[..])
                })
            })
        })
        .collect()
}

/// Random corpus of roughly `total_tokens` tokens drawn uniformly from
/// `0..vocab`, split into documents of length `1..=max_doc`.
pub fn random_docs(
    rng: &mut ChaCha8Rng,
    total_tokens: usize,
    vocab: u16,
    max_doc: usize,
) -> Vec<Vec<u16>> {
    assert!(vocab >= 1 && vocab < EOD);
    let mut docs = Vec::new();
    let mut made = 0;
    while made < total_tokens {
        let len = rng.gen_range(1..=max_doc).min(total_tokens - made).max(1);
        let doc: Vec<u16> = (0..len).map(|_| rng.gen_range(0..vocab)).collect();
        made += len + 1;
        docs.push(doc);
    }
    docs
}

/// A random query: either a substring lifted from the corpus (so it is
/// usually present) or uniformly random tokens.
pub fn random_query(rng: &mut ChaCha8Rng, docs: &[Vec<u16>], vocab: u16, max_len: usize) -> Vec<u16> {
    let len = rng.gen_range(1..=max_len);
    if rng.gen_bool(0.7) {
        let d = &docs[rng.gen_range(0..docs.len())];
        let start = rng.gen_range(0..d.len());
        let end = (start + len).min(d.len());
        d[start..end].to_vec()
    } else {
        (0..len).map(|_| rng.gen_range(0..vocab)).collect()
    }
}

/// The two-document toy corpus used throughout the examples.
pub fn toy_corpus() -> Vec<Vec<u16>> {
    vec![vec![1, 2, 3, 1, 2], vec![2, 3, 4]]
}
