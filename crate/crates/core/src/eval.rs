//! Interpolation with an external model, perplexity, and agreement analysis.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::index::Index;
use crate::lm::{InfgramResult, Lm};
use crate::token::Token;

/// Mixing weights: `sparse` applies to sparse ∞-gram estimates, `dense`
/// to all others.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InterpolationConfig {
    pub lambda_sparse: f64,
    pub lambda_dense: f64,
}

impl InterpolationConfig {
    pub const NEURAL_ONLY: Self = Self { lambda_sparse: 0.0, lambda_dense: 0.0 };

    pub fn new(lambda_sparse: f64, lambda_dense: f64) -> Result<Self> {
        for l in [lambda_sparse, lambda_dense] {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::InvalidArgument(alloc::format!("lambda {l} outside [0, 1]")));
            }
        }
        Ok(Self { lambda_sparse, lambda_dense })
    }

    pub fn weight(&self, sparse: bool) -> f64 {
        if sparse {
            self.lambda_sparse
        } else {
            self.lambda_dense
        }
    }
}

/// `λ·P_∞ + (1 − λ)·P_neural`, with λ chosen by the estimate's sparsity.
pub fn interpolate(inf: &InfgramResult, p_neural: f64, cfg: &InterpolationConfig) -> f64 {
    mix(inf.prob.to_f64(), inf.sparse, p_neural, cfg)
}

#[inline]
fn mix(p_inf: f64, sparse: bool, p_neural: f64, cfg: &InterpolationConfig) -> f64 {
    let l = cfg.weight(sparse);
    l * p_inf + (1.0 - l) * p_neural
}

/// Share of the gap to perfect perplexity closed, in percent:
/// `(1 − (ppl − 1) / (baseline − 1)) · 100`.
pub fn relative_improvement(ppl: f64, baseline: f64) -> f64 {
    (1.0 - (ppl - 1.0) / (baseline - 1.0)) * 100.0
}

/// Running negative log-likelihood (natural log).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NllAccumulator {
    pub tokens: u64,
    pub nll: f64,
    /// Tokens assigned probability zero.
    pub zero_prob: u64,
}

impl NllAccumulator {
    pub fn add(&mut self, p: f64) {
        self.tokens += 1;
        if p > 0.0 {
            self.nll -= libm::log(p);
        } else {
            self.zero_prob += 1;
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.tokens += other.tokens;
        self.nll += other.nll;
        self.zero_prob += other.zero_prob;
    }

    pub fn mean_nll(&self) -> f64 {
        if self.zero_prob > 0 {
            return f64::INFINITY;
        }
        self.nll / self.tokens as f64
    }

    pub fn perplexity(&self) -> f64 {
        libm::exp(self.mean_nll())
    }
}

/// One evaluation token: its ∞-gram estimate and the external probability.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoredToken {
    pub infgram: f64,
    pub sparse: bool,
    pub effective_n: usize,
    pub neural: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PerplexityReport {
    pub token_count: u64,
    pub lambdas: InterpolationConfig,
    pub mean_nll: f64,
    pub ppl: f64,
    pub baseline_mean_nll: f64,
    pub baseline_ppl: f64,
    pub relative_improvement: f64,
    /// Tokens the combined model gave probability zero (ppl is then infinite).
    pub zero_prob_tokens: u64,
}

pub fn combined_nll(tokens: &[ScoredToken], cfg: &InterpolationConfig) -> NllAccumulator {
    let mut acc = NllAccumulator::default();
    for t in tokens {
        acc.add(mix(t.infgram, t.sparse, t.neural, cfg));
    }
    acc
}

pub fn perplexity_report(tokens: &[ScoredToken], cfg: &InterpolationConfig) -> PerplexityReport {
    let combined = combined_nll(tokens, cfg);
    let baseline = combined_nll(tokens, &InterpolationConfig::NEURAL_ONLY);
    let (ppl, baseline_ppl) = (combined.perplexity(), baseline.perplexity());
    PerplexityReport {
        token_count: combined.tokens,
        lambdas: *cfg,
        mean_nll: combined.mean_nll(),
        ppl,
        baseline_mean_nll: baseline.mean_nll(),
        baseline_ppl,
        relative_improvement: relative_improvement(ppl, baseline_ppl),
        zero_prob_tokens: combined.zero_prob,
    }
}

/// The `(λ_sparse, λ_dense)` grid over multiples of 0.05 with
/// `λ_sparse ≥ λ_dense`.
pub fn default_lambda_grid() -> Vec<InterpolationConfig> {
    let steps: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let mut grid = Vec::new();
    for &a in &steps {
        for &b in &steps {
            if a >= b {
                grid.push(InterpolationConfig { lambda_sparse: a, lambda_dense: b });
            }
        }
    }
    grid
}

/// Grid point with the lowest perplexity; ties go to the lexicographically
/// smaller `(λ_sparse, λ_dense)`. The grid must contain `(0, 0)`.
pub fn tune_lambdas(tokens: &[ScoredToken], grid: &[InterpolationConfig]) -> Result<(InterpolationConfig, f64)> {
    if !grid.contains(&InterpolationConfig::NEURAL_ONLY) {
        return Err(Error::InvalidArgument("lambda grid must contain (0, 0)".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| {
        a.lambda_sparse
            .total_cmp(&b.lambda_sparse)
            .then(a.lambda_dense.total_cmp(&b.lambda_dense))
    });
    let mut best = (InterpolationConfig::NEURAL_ONLY, f64::INFINITY);
    for cfg in sorted {
        let ppl = combined_nll(tokens, &cfg).perplexity();
        if ppl < best.1 || (best.1.is_infinite() && ppl.is_infinite() && cfg == InterpolationConfig::NEURAL_ONLY) {
            best = (cfg, ppl);
        }
    }
    Ok(best)
}

/// A window `[start, end)` over a document that scores `[score_from, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: usize,
    pub score_from: usize,
    pub end: usize,
}

pub const EVAL_MAX_LEN: usize = 1024;
pub const EVAL_STRIDE: usize = 512;

/// Sliding windows of `max_len` tokens advancing by `stride`; the first
/// window scores all its tokens, each later one only the tokens past the
/// previous window's end, so every token is scored exactly once.
pub fn sliding_windows(len: usize, max_len: usize, stride: usize) -> Vec<Window> {
    assert!(stride >= 1 && stride <= max_len);
    let mut out = Vec::new();
    if len == 0 {
        return out;
    }
    let mut w = Window { start: 0, score_from: 0, end: len.min(max_len) };
    out.push(w);
    while w.end < len {
        let start = w.start + stride;
        w = Window { start, score_from: w.end, end: (start + max_len).min(len) };
        out.push(w);
    }
    out
}

/// ∞-gram estimate for every token of `doc`, the context of each token
/// running from the start of the window that scores it.
pub fn score_document<B: AsRef<[u8]>>(
    lm: &Lm<'_, B>,
    doc: &[Token],
    max_len: usize,
    stride: usize,
) -> Result<Vec<InfgramResult>> {
    let mut out = Vec::with_capacity(doc.len());
    for w in sliding_windows(doc.len(), max_len, stride) {
        let scored = lm.dense_scan(&doc[w.start..w.end])?;
        out.extend_from_slice(&scored[w.score_from - w.start..]);
    }
    Ok(out)
}

/// Score documents and pair them with per-token external probabilities.
pub fn scored_tokens<B: AsRef<[u8]>>(
    lm: &Lm<'_, B>,
    docs: &[(&[Token], &[f64])],
    max_len: usize,
    stride: usize,
) -> Result<Vec<ScoredToken>> {
    let mut out = Vec::new();
    for (d, (toks, probs)) in docs.iter().enumerate() {
        if toks.len() != probs.len() {
            return Err(Error::InvalidArgument(alloc::format!(
                "document {d}: {} tokens but {} probabilities",
                toks.len(),
                probs.len()
            )));
        }
        for (i, inf) in score_document(lm, toks, max_len, stride)?.into_iter().enumerate() {
            out.push(ScoredToken {
                infgram: inf.prob.to_f64(),
                sparse: inf.sparse,
                effective_n: inf.effective_n,
                neural: probs[i],
            });
        }
    }
    Ok(out)
}

/// Token count and number of accurate predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bucket {
    pub tokens: u64,
    pub agree: u64,
}

impl Bucket {
    fn add(&mut self, agree: bool) {
        self.tokens += 1;
        self.agree += agree as u64;
    }

    fn merge(&mut self, o: &Bucket) {
        self.tokens += o.tokens;
        self.agree += o.agree;
    }

    pub fn rate(&self) -> f64 {
        if self.tokens == 0 {
            return 0.0;
        }
        self.agree as f64 / self.tokens as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BucketRow {
    pub effective_n: usize,
    pub tokens: u64,
    pub agree: u64,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridRow {
    pub effective_n: usize,
    /// `floor(log10(suffix count))`.
    pub frequency_decade: u32,
    pub tokens: u64,
    pub agree: u64,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FixedNRow {
    pub n: usize,
    pub tokens: u64,
    pub agree: u64,
    pub undefined: u64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AgreementReport {
    pub total_tokens: u64,
    pub agree_tokens: u64,
    pub overall_rate: f64,
    pub sparse_tokens: u64,
    pub sparse_agree: u64,
    pub sparse_rate: f64,
    pub by_effective_n: Vec<BucketRow>,
    pub sparse_by_effective_n: Vec<BucketRow>,
    pub grid: Vec<GridRow>,
    pub fixed_n: Option<FixedNRow>,
}

/// Order-insensitive accumulator behind [`AgreementReport`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgreementTally {
    by_n: BTreeMap<usize, Bucket>,
    sparse_by_n: BTreeMap<usize, Bucket>,
    grid: BTreeMap<(usize, u32), Bucket>,
    fixed: Option<(usize, Bucket, u64)>,
}

/// Accurate means the actual token gets probability strictly above 1/2.
pub fn is_accurate(r: &InfgramResult) -> bool {
    r.prob.exceeds(1, 2)
}

fn decade(count: u64) -> u32 {
    count.max(1).ilog10()
}

impl AgreementTally {
    pub fn with_fixed_n(n: usize) -> Self {
        Self { fixed: Some((n, Bucket::default(), 0)), ..Default::default() }
    }

    pub fn add(&mut self, r: &InfgramResult) {
        let ok = is_accurate(r);
        self.by_n.entry(r.effective_n).or_default().add(ok);
        if r.sparse {
            self.sparse_by_n.entry(r.effective_n).or_default().add(ok);
        }
        self.grid.entry((r.effective_n, decade(r.suffix_count))).or_default().add(ok);
    }

    pub fn merge(&mut self, o: &AgreementTally) {
        for (k, b) in &o.by_n {
            self.by_n.entry(*k).or_default().merge(b);
        }
        for (k, b) in &o.sparse_by_n {
            self.sparse_by_n.entry(*k).or_default().merge(b);
        }
        for (k, b) in &o.grid {
            self.grid.entry(*k).or_default().merge(b);
        }
        if let (Some((_, b, u)), Some((_, ob, ou))) = (self.fixed.as_mut(), o.fixed.as_ref()) {
            b.merge(ob);
            *u += ou;
        }
    }

    /// Score one document with the ∞-gram (and the fixed-n model if set).
    pub fn add_document<B: AsRef<[u8]>>(&mut self, lm: &Lm<'_, B>, doc: &[Token]) -> Result<()> {
        for r in lm.dense_scan(doc)? {
            self.add(&r);
        }
        if let Some((n, bucket, undefined)) = self.fixed.as_mut() {
            for i in 0..doc.len() {
                let order = (*n).min(i + 1);
                let p = lm.ngram_prob(&doc[..i], doc[i], order)?;
                match p.prob {
                    Some(prob) => bucket.add(prob.exceeds(1, 2)),
                    None => {
                        bucket.add(false);
                        *undefined += 1;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn report(&self) -> AgreementReport {
        let rows = |m: &BTreeMap<usize, Bucket>| -> Vec<BucketRow> {
            m.iter()
                .map(|(&effective_n, b)| BucketRow { effective_n, tokens: b.tokens, agree: b.agree, rate: b.rate() })
                .collect()
        };
        let mut all = Bucket::default();
        self.by_n.values().for_each(|b| all.merge(b));
        let mut sparse = Bucket::default();
        self.sparse_by_n.values().for_each(|b| sparse.merge(b));
        AgreementReport {
            total_tokens: all.tokens,
            agree_tokens: all.agree,
            overall_rate: all.rate(),
            sparse_tokens: sparse.tokens,
            sparse_agree: sparse.agree,
            sparse_rate: sparse.rate(),
            by_effective_n: rows(&self.by_n),
            sparse_by_effective_n: rows(&self.sparse_by_n),
            grid: self
                .grid
                .iter()
                .map(|(&(effective_n, frequency_decade), b)| GridRow {
                    effective_n,
                    frequency_decade,
                    tokens: b.tokens,
                    agree: b.agree,
                    rate: b.rate(),
                })
                .collect(),
            fixed_n: self.fixed.map(|(n, b, undefined)| FixedNRow {
                n,
                tokens: b.tokens,
                agree: b.agree,
                undefined,
                rate: b.rate(),
            }),
        }
    }
}

/// Token-wise agreement between the ∞-gram and the given documents.
pub fn agreement_analysis<B: AsRef<[u8]>, D: AsRef<[Token]>>(
    lm: &Lm<'_, B>,
    docs: &[D],
    fixed_n: Option<usize>,
) -> Result<AgreementReport> {
    let mut tally = fixed_n.map(AgreementTally::with_fixed_n).unwrap_or_default();
    for d in docs {
        tally.add_document(lm, d.as_ref())?;
    }
    Ok(tally.report())
}

/// Fraction of tokens with `effective_n >= min_n` that are accurate.
pub fn agreement_at_least(report: &AgreementReport, min_n: usize) -> Bucket {
    let mut b = Bucket::default();
    for r in report.by_effective_n.iter().filter(|r| r.effective_n >= min_n) {
        b.merge(&Bucket { tokens: r.tokens, agree: r.agree });
    }
    b
}

impl<B: AsRef<[u8]>> Index<B> {
    /// Perplexity report for documents paired with external probabilities.
    pub fn evaluate_ppl(
        &self,
        lm: &Lm<'_, B>,
        docs: &[(&[Token], &[f64])],
        cfg: &InterpolationConfig,
    ) -> Result<PerplexityReport> {
        let tokens = scored_tokens(lm, docs, EVAL_MAX_LEN, EVAL_STRIDE)?;
        Ok(perplexity_report(&tokens, cfg))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::LmConfig;
    use crate::memory::index_of;
    use crate::ratio::Ratio;
    use alloc::vec;
    use infgram_testkit::toy_corpus;

    fn inf(num: u64, den: u64, sparse: bool) -> InfgramResult {
        InfgramResult { prob: Ratio::new(num, den), effective_n: 2, suffix_count: den, cont_count: num, sparse }
    }

    #[test]
    fn interpolation_cases() {
        let zero = InterpolationConfig::NEURAL_ONLY;
        assert_eq!(interpolate(&inf(1, 2, false), 0.1, &zero), 0.1);
        let one = InterpolationConfig::new(1.0, 1.0).unwrap();
        assert_eq!(interpolate(&inf(1, 1, true), 0.2, &one), 1.0);
        let half = InterpolationConfig::new(0.0, 0.5).unwrap();
        assert!((interpolate(&inf(1, 2, false), 0.1, &half) - 0.3).abs() < 1e-12);
        assert!(InterpolationConfig::new(1.5, 0.0).is_err());
        // zero-probability token under λ = 1
        let r = perplexity_report(
            &[ScoredToken { infgram: 0.0, sparse: true, effective_n: 3, neural: 0.5 }],
            &one,
        );
        assert!(r.ppl.is_infinite());
        assert_eq!(r.zero_prob_tokens, 1);
    }

    #[test]
    fn relative_improvement_figure() {
        let r = relative_improvement(13.71, 22.82);
        assert!((r - 41.75).abs() < 0.01);
        assert_eq!(libm::round(r), 42.0);
        assert_eq!(relative_improvement(5.0, 5.0), 0.0);
    }

    #[test]
    fn windows_score_each_token_once() {
        assert!(sliding_windows(0, 1024, 512).is_empty());
        assert_eq!(sliding_windows(10, 1024, 512), [Window { start: 0, score_from: 0, end: 10 }]);
        let w = sliding_windows(2000, 1024, 512);
        assert_eq!(
            w,
            [
                Window { start: 0, score_from: 0, end: 1024 },
                Window { start: 512, score_from: 1024, end: 1536 },
                Window { start: 1024, score_from: 1536, end: 2000 },
            ]
        );
        for len in [1usize, 511, 512, 1023, 1024, 1025, 1536, 1537, 5000] {
            let ws = sliding_windows(len, 1024, 512);
            let scored: usize = ws.iter().map(|w| w.end - w.score_from).sum();
            assert_eq!(scored, len);
            for pair in ws.windows(2) {
                assert_eq!(pair[1].score_from, pair[0].end);
                assert!(pair[1].end - pair[1].score_from <= 512);
            }
        }
    }

    #[test]
    fn tuning() {
        let toks = [
            ScoredToken { infgram: 1.0, sparse: true, effective_n: 4, neural: 0.3 },
            ScoredToken { infgram: 0.0, sparse: false, effective_n: 2, neural: 0.3 },
        ];
        let (cfg, ppl) = tune_lambdas(&toks, &[InterpolationConfig::NEURAL_ONLY]).unwrap();
        assert_eq!(cfg, InterpolationConfig::NEURAL_ONLY);
        assert!((ppl - 1.0 / 0.3).abs() < 1e-9);
        let (cfg, ppl) = tune_lambdas(&toks, &default_lambda_grid()).unwrap();
        assert_eq!(cfg.lambda_dense, 0.0);
        assert!(cfg.lambda_sparse > 0.0);
        assert!(ppl <= 1.0 / 0.3);
        assert!(tune_lambdas(&toks, &[InterpolationConfig::new(0.5, 0.5).unwrap()]).is_err());
    }

    #[test]
    fn accuracy_threshold() {
        assert!(is_accurate(&inf(51, 100, false)));
        assert!(!is_accurate(&inf(1, 2, false)));
        assert!(is_accurate(&inf(1, 1, true)));
    }

    #[test]
    fn toy_agreement() {
        let idx = index_of(&toy_corpus()).unwrap();
        let lm = idx.lm(LmConfig::default());
        let rep = agreement_analysis(&lm, &[vec![1u16, 2, 3, 1, 2]], Some(5)).unwrap();
        assert_eq!(rep.total_tokens, 5);
        let bucket_total: u64 = rep.by_effective_n.iter().map(|r| r.tokens).sum();
        assert_eq!(bucket_total, 5);
        assert_eq!(rep.by_effective_n[0].effective_n, 1);
        assert_eq!(rep.fixed_n.unwrap().tokens, 5);

        let a = agreement_analysis(&lm, &[vec![1u16, 2], vec![2, 3, 4]], None).unwrap();
        let b = agreement_analysis(&lm, &[vec![2u16, 3, 4], vec![1, 2]], None).unwrap();
        assert_eq!(a, b);
    }
}
