//! Perplexity and agreement runs over files.
//!
//! External probabilities arrive as newline-delimited records
//! `{"doc_id": .., "token_ids": [..], "probs": [..]}`, one per evaluation
//! document and in the same order as the documents file.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use infgram_core::eval::{
    agreement_analysis, default_lambda_grid, perplexity_report, scored_tokens, tune_lambdas, AgreementReport,
    InterpolationConfig, PerplexityReport, ScoredToken, EVAL_MAX_LEN, EVAL_STRIDE,
};
use infgram_core::{LmConfig, Token};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::records::read_tokenized;
use crate::store::CorpusIndex;

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct NeuralRecord {
    #[serde(default)]
    pub doc_id: Value,
    pub token_ids: Vec<u64>,
    pub probs: Vec<f64>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub tokenizer: Option<String>,
}

pub fn read_neural(path: &Path) -> Result<Vec<NeuralRecord>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}: malformed record", path.display(), i + 1)))
        .collect()
}

/// Pair each document with its probabilities, failing on the first
/// misaligned document or position.
pub fn align(docs: Vec<Vec<Token>>, neural: Vec<NeuralRecord>, tokenizer: &str) -> Result<Vec<(Vec<Token>, Vec<f64>)>> {
    if docs.len() != neural.len() {
        bail!("{} documents but {} probability records", docs.len(), neural.len());
    }
    let mut out = Vec::with_capacity(docs.len());
    for (i, (doc, rec)) in docs.into_iter().zip(neural).enumerate() {
        let id = &rec.doc_id;
        if let Some(t) = &rec.tokenizer {
            if t != tokenizer {
                bail!("document {i} (doc_id {id}): probabilities use tokenizer {t}, index uses {tokenizer}");
            }
        }
        if rec.probs.len() != rec.token_ids.len() {
            bail!("document {i} (doc_id {id}): {} token_ids but {} probs", rec.token_ids.len(), rec.probs.len());
        }
        let n = doc.len().max(rec.token_ids.len());
        if let Some(p) = (0..n).find(|&p| doc.get(p).map(|&t| t as u64) != rec.token_ids.get(p).copied()) {
            bail!("document {i} (doc_id {id}): token mismatch at position {p}");
        }
        if let Some(p) = rec.probs.iter().position(|&x| !(x > 0.0 && x <= 1.0)) {
            bail!("document {i} (doc_id {id}): probability {} at position {p} is outside (0, 1]", rec.probs[p]);
        }
        out.push((doc, rec.probs));
    }
    Ok(out)
}

fn scored(ci: &CorpusIndex, docs: &Path, neural: &Path, max_context: Option<usize>) -> Result<Vec<ScoredToken>> {
    let toks = read_tokenized(docs, &ci.tokenizer)?;
    let aligned = align(toks, read_neural(neural)?, &ci.dirs[0].manifest.tokenizer)?;
    let pairs: Vec<(&[Token], &[f64])> = aligned.iter().map(|(d, p)| (d.as_slice(), p.as_slice())).collect();
    let lm = ci.index.lm(LmConfig { max_context, ..LmConfig::default() });
    Ok(scored_tokens(&lm, &pairs, EVAL_MAX_LEN, EVAL_STRIDE)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct Tuned {
    pub lambda1: f64,
    pub lambda2: f64,
    pub validation_ppl: f64,
    pub validation_baseline_ppl: f64,
    pub grid_size: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PplOutput {
    pub window: usize,
    pub stride: usize,
    pub report: PerplexityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuned: Option<Tuned>,
}

pub enum Lambdas<'a> {
    Fixed(InterpolationConfig),
    /// Tune on validation documents and their probabilities.
    Tune { docs: &'a Path, neural: &'a Path },
}

pub fn run_ppl(ci: &CorpusIndex, docs: &Path, neural: &Path, lambdas: Lambdas<'_>) -> Result<PplOutput> {
    let max_context = Some(EVAL_MAX_LEN);
    let (cfg, tuned) = match lambdas {
        Lambdas::Fixed(c) => (c, None),
        Lambdas::Tune { docs, neural } => {
            let val = scored(ci, docs, neural, max_context)?;
            let grid = default_lambda_grid();
            let (cfg, validation_ppl) = tune_lambdas(&val, &grid)?;
            let base = perplexity_report(&val, &InterpolationConfig::NEURAL_ONLY).ppl;
            let t = Tuned {
                lambda1: cfg.lambda_sparse,
                lambda2: cfg.lambda_dense,
                validation_ppl,
                validation_baseline_ppl: base,
                grid_size: grid.len(),
            };
            (cfg, Some(t))
        }
    };
    let test = scored(ci, docs, neural, max_context)?;
    let report = perplexity_report(&test, &cfg);
    if report.zero_prob_tokens > 0 {
        eprintln!("warning: {} tokens have probability zero; perplexity is infinite", report.zero_prob_tokens);
    }
    Ok(PplOutput { window: EVAL_MAX_LEN, stride: EVAL_STRIDE, report, tuned })
}

pub fn run_agree(ci: &CorpusIndex, docs: &Path, fixed_n: Option<usize>, max_context: Option<usize>) -> Result<AgreementReport> {
    let toks = read_tokenized(docs, &ci.tokenizer)?;
    let lm = ci.index.lm(LmConfig { max_context, ..LmConfig::default() });
    Ok(agreement_analysis(&lm, &toks, fixed_n)?)
}

/// Tab-separated bucket tables: by effective n (all and sparse-only) and
/// the effective-n by frequency-decade grid.
pub fn bucket_tables(r: &AgreementReport) -> (String, String) {
    let mut by_n = String::from("effective_n\ttokens\tagree\trate\tsparse_tokens\tsparse_agree\tsparse_rate\n");
    for row in &r.by_effective_n {
        let s = r.sparse_by_effective_n.iter().find(|s| s.effective_n == row.effective_n);
        let (st, sa, sr) = s.map_or((0, 0, 0.0), |s| (s.tokens, s.agree, s.rate));
        let _ = writeln!(by_n, "{}\t{}\t{}\t{:.6}\t{st}\t{sa}\t{sr:.6}", row.effective_n, row.tokens, row.agree, row.rate);
    }
    let mut grid = String::from("effective_n\tfrequency_decade\ttokens\tagree\trate\n");
    for g in &r.grid {
        let _ = writeln!(grid, "{}\t{}\t{}\t{}\t{:.6}", g.effective_n, g.frequency_decade, g.tokens, g.agree, g.rate);
    }
    (by_n, grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(ids: &[u64], probs: &[f64]) -> NeuralRecord {
        NeuralRecord { doc_id: Value::from(0), token_ids: ids.to_vec(), probs: probs.to_vec(), model: None, tokenizer: None }
    }

    #[test]
    fn alignment_errors_name_the_position() {
        let ok = align(vec![vec![1, 2]], vec![rec(&[1, 2], &[0.5, 1.0])], "t").unwrap();
        assert_eq!(ok[0].1, [0.5, 1.0]);
        let e = align(vec![vec![1, 2]], vec![rec(&[1, 3], &[0.5, 0.5])], "t").unwrap_err();
        assert!(e.to_string().contains("position 1"), "{e}");
        let e = align(vec![vec![1, 2]], vec![rec(&[1], &[0.5])], "t").unwrap_err();
        assert!(e.to_string().contains("position 1"), "{e}");
        assert!(align(vec![vec![1]], vec![rec(&[1], &[0.0])], "t").is_err());
        assert!(align(vec![vec![1]], vec![], "t").is_err());
        let mut r = rec(&[1], &[0.5]);
        r.tokenizer = Some("other".into());
        assert!(align(vec![vec![1]], vec![r], "t").is_err());
    }
}
