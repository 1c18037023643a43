//! Fixed-n and unbounded-n language model queries.
//!
//! The ∞-gram estimate backs off only when the context suffix is unseen:
//! it conditions on the longest suffix of the context that occurs at least
//! `min_count` times, so the chosen order depends on the context alone and
//! the next-token counts always sum to the suffix count.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::index::Index;
use crate::ratio::Ratio;
use crate::search::Segments;
use crate::token::{self, Token};

/// Default cap on the context considered by ∞-gram queries.
pub const DEFAULT_MAX_CONTEXT: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LmConfig {
    /// Only the last `max_context` context tokens are used (`None`: all).
    pub max_context: Option<usize>,
    /// A context suffix qualifies when its count is at least this.
    pub min_count: u64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self { max_context: Some(DEFAULT_MAX_CONTEXT), min_count: 1 }
    }
}

/// `P_n(token | context)`; `prob` is `None` when the context is unseen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NgramProb {
    pub prob: Option<Ratio>,
    pub context_count: u64,
    pub cont_count: u64,
}

/// One ∞-gram estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InfgramResult {
    pub prob: Ratio,
    /// One plus the length of the context suffix used.
    pub effective_n: usize,
    pub suffix_count: u64,
    pub cont_count: u64,
    /// The suffix has exactly one possible continuation.
    pub sparse: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DistEntry {
    pub token: Token,
    pub count: u64,
    pub prob: Ratio,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NextTokenDistribution {
    /// Ascending by token ID; every count is positive.
    pub entries: Vec<DistEntry>,
    pub total: u64,
    pub effective_n: usize,
}

impl NextTokenDistribution {
    fn from_counts(counts: Vec<(Token, u64)>, total: u64, effective_n: usize) -> Self {
        let entries = counts
            .into_iter()
            .map(|(token, count)| DistEntry { token, count, prob: Ratio::new(count, total) })
            .collect();
        Self { entries, total, effective_n }
    }

    /// Counts sum to the denominator, so probabilities sum to exactly 1.
    pub fn is_normalized(&self) -> bool {
        self.total > 0 && self.entries.iter().map(|e| e.count).sum::<u64>() == self.total
    }

    pub fn is_sparse(&self) -> bool {
        self.entries.len() == 1
    }

    pub fn get(&self, token: Token) -> Option<&DistEntry> {
        self.entries.binary_search_by_key(&token, |e| e.token).ok().map(|i| &self.entries[i])
    }
}

/// The longest qualifying context suffix and its segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Backoff {
    pub suffix_len: usize,
    pub count: u64,
    pub segments: Segments,
}

/// Language-model view of an index.
#[derive(Debug, Clone, Copy)]
pub struct Lm<'a, B> {
    index: &'a Index<B>,
    config: LmConfig,
}

impl<B: AsRef<[u8]>> Index<B> {
    pub fn lm(&self, config: LmConfig) -> Lm<'_, B> {
        Lm { index: self, config }
    }
}

impl<'a, B: AsRef<[u8]>> Lm<'a, B> {
    pub fn config(&self) -> LmConfig {
        self.config
    }

    fn capped<'c>(&self, context: &'c [Token]) -> &'c [Token] {
        match self.config.max_context {
            Some(cap) if context.len() > cap => &context[context.len() - cap..],
            _ => context,
        }
    }

    fn ngram_context<'c>(&self, context: &'c [Token], n: usize) -> Result<&'c [Token]> {
        token::check_context(context)?;
        if n == 0 {
            return Err(Error::ZeroOrder);
        }
        if n > context.len() + 1 {
            return Err(Error::ContextTooShort { n, available: context.len() });
        }
        Ok(&context[context.len() + 1 - n..])
    }

    fn extend(&self, suffix: &[Token], token: Token, segs: &Segments) -> Result<u64> {
        let mut q = Vec::with_capacity(suffix.len() + 1);
        q.extend_from_slice(suffix);
        q.push(token);
        let segs = self.index.find_segments_to_end(&q, Some(segs))?;
        self.index.count_segments(&segs)
    }

    /// Fixed-order estimate from the last `n - 1` context tokens, without
    /// backoff. `token` may be the separator (end of document).
    pub fn ngram_prob(&self, context: &[Token], token: Token, n: usize) -> Result<NgramProb> {
        let ctx = self.ngram_context(context, n)?;
        let segs = self.index.find_segments(ctx, None)?;
        let context_count = self.index.count_segments(&segs)?;
        if context_count == 0 {
            return Ok(NgramProb { prob: None, context_count, cont_count: 0 });
        }
        let cont_count = self.extend(ctx, token, &segs)?;
        Ok(NgramProb { prob: Some(Ratio::new(cont_count, context_count)), context_count, cont_count })
    }

    /// Full fixed-order next-token distribution; `None` for an unseen context.
    pub fn ngram_dist(&self, context: &[Token], n: usize) -> Result<Option<NextTokenDistribution>> {
        let ctx = self.ngram_context(context, n)?;
        let segs = self.index.find_segments(ctx, None)?;
        let total = self.index.count_segments(&segs)?;
        if total == 0 {
            return Ok(None);
        }
        let counts = self.index.continuations(&segs)?;
        Ok(Some(NextTokenDistribution::from_counts(counts, total, n)))
    }

    fn qualifies(&self, suffix: &[Token]) -> Result<Option<(u64, Segments)>> {
        let segs = self.index.find_segments(suffix, None)?;
        let c = self.index.count_segments(&segs)?;
        Ok((c >= self.config.min_count.max(1)).then_some((c, segs)))
    }

    /// Longest context suffix with a qualifying count, found with
    /// `O(log L)` count operations: double the length until it fails, then
    /// binary search between the last success and the first failure.
    pub fn longest_suffix(&self, context: &[Token]) -> Result<Backoff> {
        token::check_context(context)?;
        let ctx = self.capped(context);
        let len = ctx.len();
        let suffix = |k: usize| &ctx[len - k..];

        let empty = self.index.full_segments();
        let n_total = self.index.count_segments(&empty)?;
        let mut good = (0usize, n_total, empty);
        let mut bad: Option<usize> = None;
        let mut step = 1usize;
        while good.0 < len {
            let k = step.min(len);
            match self.qualifies(suffix(k))? {
                Some((c, segs)) => good = (k, c, segs),
                None => {
                    bad = Some(k);
                    break;
                }
            }
            step = step.saturating_mul(2);
        }
        if let Some(mut bad) = bad {
            while bad - good.0 > 1 {
                let mid = good.0 + (bad - good.0) / 2;
                match self.qualifies(suffix(mid))? {
                    Some((c, segs)) => good = (mid, c, segs),
                    None => bad = mid,
                }
            }
        }
        Ok(Backoff { suffix_len: good.0, count: good.1, segments: good.2 })
    }

    fn finish(&self, suffix: &[Token], backoff: &Backoff, token: Token) -> Result<InfgramResult> {
        let cont_count = self.extend(suffix, token, &backoff.segments)?;
        let sparse = if cont_count == backoff.count {
            true
        } else if cont_count > 0 {
            false
        } else {
            self.index.sole_continuation(&backoff.segments)?.is_some()
        };
        Ok(InfgramResult {
            prob: Ratio::new(cont_count, backoff.count),
            effective_n: backoff.suffix_len + 1,
            suffix_count: backoff.count,
            cont_count,
            sparse,
        })
    }

    /// ∞-gram probability of `token` after `context`.
    pub fn infgram_prob(&self, context: &[Token], token: Token) -> Result<InfgramResult> {
        let backoff = self.longest_suffix(context)?;
        let ctx = self.capped(context);
        self.finish(&ctx[ctx.len() - backoff.suffix_len..], &backoff, token)
    }

    /// ∞-gram next-token distribution; always defined.
    pub fn infgram_dist(&self, context: &[Token]) -> Result<NextTokenDistribution> {
        let backoff = self.longest_suffix(context)?;
        let counts = self.index.continuations(&backoff.segments)?;
        Ok(NextTokenDistribution::from_counts(counts, backoff.count, backoff.suffix_len + 1))
    }

    /// ∞-gram estimate for every token of a document, each conditioned on
    /// the tokens before it.
    ///
    /// The suffix chosen for token `i + 1` is at most one token longer than
    /// the one for token `i`, so the search starts there and shrinks; the
    /// shrink steps are paid for by earlier growth, giving an amortized
    /// constant number of count operations per token.
    pub fn dense_scan(&self, doc: &[Token]) -> Result<Vec<InfgramResult>> {
        token::check_context(doc)?;
        let cap = self.config.max_context.unwrap_or(usize::MAX);
        let empty = self.index.full_segments();
        let n_total = self.index.count_segments(&empty)?;
        let mut out = Vec::with_capacity(doc.len());
        let mut prev = 0usize;
        for i in 0..doc.len() {
            let avail = i.min(cap);
            let mut k = (prev + 1).min(avail);
            let backoff = loop {
                if k == 0 {
                    break Backoff { suffix_len: 0, count: n_total, segments: empty.clone() };
                }
                if let Some((c, segs)) = self.qualifies(&doc[i - k..i])? {
                    break Backoff { suffix_len: k, count: c, segments: segs };
                }
                k -= 1;
            };
            prev = backoff.suffix_len;
            out.push(self.finish(&doc[i - prev..i], &backoff, doc[i])?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::index_of;
    use crate::token::SEPARATOR;
    use infgram_testkit::toy_corpus;

    fn lm_toy() -> Index<Vec<u8>> {
        index_of(&toy_corpus()).unwrap()
    }

    #[test]
    fn toy_ngram_prob() {
        let idx = lm_toy();
        let lm = idx.lm(LmConfig::default());
        assert_eq!(lm.ngram_prob(&[2], 3, 2).unwrap().prob, Some(Ratio::new(2, 3)));
        assert_eq!(lm.ngram_prob(&[1, 2], 3, 3).unwrap().prob, Some(Ratio::new(1, 2)));
        assert_eq!(lm.ngram_prob(&[9], 3, 2).unwrap().prob, None);
        assert_eq!(lm.ngram_prob(&[5, 5], 2, 1).unwrap().prob, Some(Ratio::new(3, 10)));
        assert_eq!(lm.ngram_prob(&[2], SEPARATOR, 2).unwrap().prob, Some(Ratio::new(1, 3)));
        assert_eq!(lm.ngram_prob(&[2], 3, 3), Err(Error::ContextTooShort { n: 3, available: 1 }));
        assert_eq!(lm.ngram_prob(&[2], 3, 0), Err(Error::ZeroOrder));
    }

    #[test]
    fn toy_ngram_dist() {
        let idx = lm_toy();
        let lm = idx.lm(LmConfig::default());
        let d = lm.ngram_dist(&[2], 2).unwrap().unwrap();
        let got: Vec<(Token, u64, Ratio)> = d.entries.iter().map(|e| (e.token, e.count, e.prob)).collect();
        assert_eq!(got, [(3, 2, Ratio::new(2, 3)), (SEPARATOR, 1, Ratio::new(1, 3))]);
        assert!(d.is_normalized());
        let d = lm.ngram_dist(&[1, 2, 3], 4).unwrap().unwrap();
        assert_eq!(d.entries.len(), 1);
        assert_eq!((d.entries[0].token, d.entries[0].prob), (1, Ratio::new(1, 1)));
        assert_eq!(lm.ngram_dist(&[9], 2).unwrap(), None);
    }

    #[test]
    fn toy_longest_suffix() {
        let idx = lm_toy();
        let lm = idx.lm(LmConfig::default());
        let b = lm.longest_suffix(&[7, 1, 2]).unwrap();
        assert_eq!((b.suffix_len, b.count), (2, 2));
        assert_eq!(lm.longest_suffix(&[9]).unwrap().suffix_len, 0);
        assert_eq!(lm.longest_suffix(&[9]).unwrap().count, 10);
        assert_eq!(lm.longest_suffix(&[2, 3, 4]).unwrap().suffix_len, 3);
        assert_eq!(lm.longest_suffix(&[]).unwrap().suffix_len, 0);
    }

    #[test]
    fn toy_infgram() {
        let idx = lm_toy();
        let lm = idx.lm(LmConfig::default());
        let r = lm.infgram_prob(&[7, 1, 2], 3).unwrap();
        assert_eq!((r.prob, r.effective_n, r.sparse), (Ratio::new(1, 2), 3, false));
        let r = lm.infgram_prob(&[7, 1, 2, 3], 1).unwrap();
        assert_eq!((r.prob, r.effective_n, r.sparse), (Ratio::new(1, 1), 4, true));
        let r = lm.infgram_prob(&[7, 1, 2, 3], 2).unwrap();
        assert_eq!((r.prob, r.sparse), (Ratio::new(0, 1), true));
        let r = lm.infgram_prob(&[9], 2).unwrap();
        assert_eq!((r.prob, r.effective_n), (Ratio::new(3, 10), 1));
    }

    #[test]
    fn toy_infgram_dist() {
        let idx = lm_toy();
        let lm = idx.lm(LmConfig::default());
        let d = lm.infgram_dist(&[7, 1, 2]).unwrap();
        let got: Vec<(Token, Ratio)> = d.entries.iter().map(|e| (e.token, e.prob)).collect();
        assert_eq!(got, [(3, Ratio::new(1, 2)), (SEPARATOR, Ratio::new(1, 2))]);
        assert_eq!(d.effective_n, 3);
        let d = lm.infgram_dist(&[]).unwrap();
        assert_eq!(d.total, 10);
        assert!(d.is_normalized());
        assert_eq!(d.get(SEPARATOR).unwrap().count, 2);
        let d = lm.infgram_dist(&[7, 1, 2, 3]).unwrap();
        assert!(d.is_sparse());
        assert!(d.entries[0].prob.is_one());
    }

    #[test]
    fn toy_dense_scan() {
        let idx = lm_toy();
        let lm = idx.lm(LmConfig::default());
        let doc = [1, 2, 3, 1, 2];
        let dense = lm.dense_scan(&doc).unwrap();
        assert_eq!(dense[4].effective_n, 5);
        assert_eq!(dense[4].suffix_count, 1);
        for (i, r) in dense.iter().enumerate() {
            assert_eq!(*r, lm.infgram_prob(&doc[..i], doc[i]).unwrap());
        }
        let single = lm.dense_scan(&[4]).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].effective_n, 1);
    }

    #[test]
    fn min_count_threshold() {
        let idx = lm_toy();
        let lm = idx.lm(LmConfig { min_count: 2, ..Default::default() });
        // [1,2] occurs twice, [7,1,2] never
        assert_eq!(lm.longest_suffix(&[3, 1, 2]).unwrap().suffix_len, 2);
        // [2,3] twice, [1,2,3] once
        assert_eq!(lm.longest_suffix(&[1, 2, 3]).unwrap().suffix_len, 2);
    }

    #[test]
    fn context_cap() {
        let idx = lm_toy();
        let lm = idx.lm(LmConfig { max_context: Some(2), min_count: 1 });
        assert_eq!(lm.longest_suffix(&[2, 3, 4]).unwrap().suffix_len, 2);
        let doc = [1, 2, 3, 1, 2];
        let dense = lm.dense_scan(&doc).unwrap();
        for (i, r) in dense.iter().enumerate() {
            assert_eq!(*r, lm.infgram_prob(&doc[..i], doc[i]).unwrap());
        }
        assert_eq!(dense[4].effective_n, 3);
    }
}
