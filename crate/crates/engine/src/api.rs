//! Query execution shared by the CLI and the HTTP service.
//!
//! Both front ends build a [`QueryRequest`], run [`execute`] and serialize
//! the returned JSON value, so identical requests give identical bytes.

use std::time::Instant;

use infgram_core::cnf::{self, CnfQuery, SearchOptions};
use infgram_core::lm::DEFAULT_MAX_CONTEXT;
use infgram_core::{DocRef, LmConfig, NextTokenDistribution, Ratio, Token, SEPARATOR};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::store::CorpusIndex;
use crate::tokenizer::check_id;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SNIPPET_TOKENS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryType {
    Count,
    NgramProb,
    NgramDist,
    InfgramProb,
    InfgramDist,
    SearchDocs,
}

impl QueryType {
    pub fn name(self) -> &'static str {
        match self {
            QueryType::Count => "count",
            QueryType::NgramProb => "ngram_prob",
            QueryType::NgramDist => "ngram_dist",
            QueryType::InfgramProb => "infgram_prob",
            QueryType::InfgramDist => "infgram_dist",
            QueryType::SearchDocs => "search_docs",
        }
    }
}

/// Text (tokenized with the index tokenizer, or CNF syntax for
/// `search_docs`) or explicit token IDs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QueryInput {
    Ids(Vec<u64>),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TokenInput {
    Id(u64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<String>,
    pub query_type: QueryType,
    pub query: QueryInput,
    /// Prediction target for the prob queries; defaults to the last query token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<TokenInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maxnum: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_count: Option<u64>,
    /// Context cap for the ∞-gram queries; 0 means unlimited.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_context: Option<usize>,
}

impl QueryRequest {
    pub fn new(query_type: QueryType, query: QueryInput) -> Self {
        Self {
            v: None,
            index: None,
            query_type,
            query,
            token: None,
            n: None,
            maxnum: None,
            seed: None,
            min_count: None,
            max_context: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ApiError {
    #[error("{message}")]
    BadRequest { field: Option<&'static str>, message: String },
    #[error("unknown index {0:?}")]
    UnknownIndex(String),
    #[error("clause {clause} is too frequent: its terms exceed the per-term count ceiling {ceiling}")]
    ClauseTooFrequent { clause: usize, ceiling: u64 },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    fn bad(field: &'static str, message: impl Into<String>) -> Self {
        ApiError::BadRequest { field: Some(field), message: message.into() }
    }

    pub fn status(&self) -> u16 {
        match self {
            ApiError::BadRequest { .. } | ApiError::ClauseTooFrequent { .. } => 400,
            ApiError::UnknownIndex(_) => 404,
            ApiError::Integrity(_) => 409,
            ApiError::Internal(_) => 500,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ApiError::BadRequest { .. } => "bad_request",
            ApiError::UnknownIndex(_) => "unknown_index",
            ApiError::ClauseTooFrequent { .. } => "clause_too_frequent",
            ApiError::Integrity(_) => "integrity",
            ApiError::Internal(_) => "internal",
        }
    }

    pub fn to_json(&self) -> Value {
        let mut e = serde_json::json!({ "kind": self.kind(), "message": self.to_string() });
        match self {
            ApiError::BadRequest { field: Some(f), .. } => e["field"] = (*f).into(),
            ApiError::ClauseTooFrequent { clause, ceiling } => {
                e["clause"] = (*clause).into();
                e["ceiling"] = (*ceiling).into();
            }
            _ => {}
        }
        e
    }

    fn from_core(field: &'static str, e: infgram_core::Error) -> Self {
        use infgram_core::Error as E;
        match e {
            E::ClauseTooFrequent { clause, ceiling } => ApiError::ClauseTooFrequent { clause, ceiling },
            E::NegativeCount(_) => ApiError::Integrity(e.to_string()),
            E::Malformed(_) => ApiError::Internal(e.to_string()),
            other => ApiError::bad(field, other.to_string()),
        }
    }
}

/// Exact probability plus its decimal rendering.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prob {
    pub numerator: String,
    pub denominator: String,
    pub decimal: f64,
}

impl From<Ratio> for Prob {
    fn from(r: Ratio) -> Self {
        Prob { numerator: r.numerator.to_string(), denominator: r.denominator.to_string(), decimal: r.to_f64() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CountResult {
    pub tokens: Vec<Token>,
    pub count: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NgramProbResult {
    pub context: Vec<Token>,
    pub token: Token,
    pub n: usize,
    /// `None` when the context does not occur.
    pub prob: Option<Prob>,
    pub context_count: u64,
    pub cont_count: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistEntryOut {
    pub token: Token,
    pub count: u64,
    pub prob: Prob,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistResult {
    pub context: Vec<Token>,
    /// Order used: the requested `n`, or the effective n for the ∞-gram.
    pub n: usize,
    pub total: u64,
    pub sparse: bool,
    pub entries: Vec<DistEntryOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_context: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_count: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NgramDistResult {
    /// `None` when the context does not occur.
    pub distribution: Option<DistResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InfgramProbResult {
    pub context: Vec<Token>,
    pub token: Token,
    pub prob: Prob,
    pub effective_n: usize,
    pub suffix_count: u64,
    pub cont_count: u64,
    pub sparse: bool,
    pub max_context: Option<usize>,
    pub min_count: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TermMatchOut {
    pub clause: usize,
    pub term: usize,
    /// Token offsets within the document.
    pub positions: Vec<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DocumentOut {
    pub directory: usize,
    pub doc: u64,
    /// Byte span in the directory's `tokens.bin`, separator included.
    pub start: u64,
    pub end: u64,
    pub token_count: u64,
    pub metadata: String,
    /// Token offset of the first snippet token within the document.
    pub snippet_start: u64,
    pub snippet: Vec<Token>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snippet_text: Option<String>,
    pub truncated: bool,
    pub matches: Vec<TermMatchOut>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchDocsResult {
    pub clauses: Vec<Vec<Vec<Token>>>,
    /// Matching documents before sampling.
    pub total: u64,
    /// `documents` is a seeded sample of the matches.
    pub sampled: bool,
    pub documents: Vec<DocumentOut>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocationOut {
    pub directory: usize,
    pub offset: u64,
    pub doc: u64,
    /// Token offset within the document.
    pub doc_offset: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PositionsResult {
    pub tokens: Vec<Token>,
    pub total: u64,
    pub sampled: bool,
    pub locations: Vec<LocationOut>,
}

/// Per-deployment execution settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecOptions {
    pub snippet_tokens: usize,
}

impl Default for ExecOptions {
    fn default() -> Self {
        Self { snippet_tokens: DEFAULT_SNIPPET_TOKENS }
    }
}

fn ids_of(ci: &CorpusIndex, q: &QueryInput) -> Result<Vec<Token>, ApiError> {
    match q {
        QueryInput::Ids(ids) => {
            ids.iter().map(|&v| check_id(v)).collect::<anyhow::Result<_>>().map_err(|e| ApiError::bad("query", e.to_string()))
        }
        QueryInput::Text(t) => ci.tokenizer.tokenize(t).map_err(|e| ApiError::bad("query", e.to_string())),
    }
}

fn target_of(ci: &CorpusIndex, t: &TokenInput) -> Result<Token, ApiError> {
    match t {
        TokenInput::Id(v) if *v == SEPARATOR as u64 => Ok(SEPARATOR),
        TokenInput::Id(v) => check_id(*v).map_err(|e| ApiError::bad("token", e.to_string())),
        TokenInput::Text(s) if s == "EOD" => Ok(SEPARATOR),
        TokenInput::Text(s) => match ci.tokenizer.tokenize(s).map_err(|e| ApiError::bad("token", e.to_string()))?[..] {
            [t] => Ok(t),
            _ => Err(ApiError::bad("token", "token must tokenize to exactly one token")),
        },
    }
}

/// Split into (context, target) for the probability queries.
fn context_and_target(ci: &CorpusIndex, req: &QueryRequest) -> Result<(Vec<Token>, Token), ApiError> {
    let mut ctx = ids_of(ci, &req.query)?;
    match &req.token {
        Some(t) => Ok((ctx, target_of(ci, t)?)),
        None => {
            let t = ctx.pop().ok_or_else(|| ApiError::bad("query", "query needs a token to predict"))?;
            Ok((ctx, t))
        }
    }
}

fn lm_config(req: &QueryRequest) -> Result<LmConfig, ApiError> {
    let min_count = req.min_count.unwrap_or(1);
    if min_count == 0 {
        return Err(ApiError::bad("min_count", "min_count must be at least 1"));
    }
    let max_context = match req.max_context {
        None => Some(DEFAULT_MAX_CONTEXT),
        Some(0) => None,
        Some(c) => Some(c),
    };
    Ok(LmConfig { max_context, min_count })
}

fn dist_out(d: NextTokenDistribution, context: Vec<Token>, cfg: Option<LmConfig>) -> DistResult {
    DistResult {
        context,
        n: d.effective_n,
        total: d.total,
        sparse: d.is_sparse(),
        entries: d.entries.iter().map(|e| DistEntryOut { token: e.token, count: e.count, prob: e.prob.into() }).collect(),
        max_context: cfg.and_then(|c| c.max_context),
        min_count: cfg.map(|c| c.min_count),
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, ApiError> {
    serde_json::to_value(v).map_err(|e| ApiError::Internal(e.to_string()))
}

/// Run one query and return its result payload.
pub fn execute(ci: &CorpusIndex, req: &QueryRequest, opts: &ExecOptions) -> Result<Value, ApiError> {
    if let Some(v) = req.v {
        if v != SCHEMA_VERSION {
            return Err(ApiError::bad("v", format!("unsupported schema version {v}")));
        }
    }
    let index = &ci.index;
    let core = |field| move |e| ApiError::from_core(field, e);
    match req.query_type {
        QueryType::Count => {
            let tokens = ids_of(ci, &req.query)?;
            let count = index.count(&tokens).map_err(core("query"))?;
            to_value(&CountResult { tokens, count })
        }
        QueryType::NgramProb => {
            let (context, token) = context_and_target(ci, req)?;
            let n = req.n.unwrap_or(context.len() + 1);
            let r = index.lm(LmConfig::default()).ngram_prob(&context, token, n).map_err(core("n"))?;
            to_value(&NgramProbResult {
                context,
                token,
                n,
                prob: r.prob.map(Prob::from),
                context_count: r.context_count,
                cont_count: r.cont_count,
            })
        }
        QueryType::NgramDist => {
            let context = ids_of(ci, &req.query)?;
            let n = req.n.unwrap_or(context.len() + 1);
            let d = index.lm(LmConfig::default()).ngram_dist(&context, n).map_err(core("n"))?;
            to_value(&NgramDistResult { distribution: d.map(|d| dist_out(d, context, None)) })
        }
        QueryType::InfgramProb => {
            let (context, token) = context_and_target(ci, req)?;
            let cfg = lm_config(req)?;
            let r = index.lm(cfg).infgram_prob(&context, token).map_err(core("query"))?;
            to_value(&InfgramProbResult {
                context,
                token,
                prob: r.prob.into(),
                effective_n: r.effective_n,
                suffix_count: r.suffix_count,
                cont_count: r.cont_count,
                sparse: r.sparse,
                max_context: cfg.max_context,
                min_count: cfg.min_count,
            })
        }
        QueryType::InfgramDist => {
            let context = ids_of(ci, &req.query)?;
            let cfg = lm_config(req)?;
            let d = index.lm(cfg).infgram_dist(&context).map_err(core("query"))?;
            to_value(&dist_out(d, context, Some(cfg)))
        }
        QueryType::SearchDocs => to_value(&search_docs(ci, req, opts)?),
    }
}

fn cnf_query(ci: &CorpusIndex, q: &QueryInput) -> Result<CnfQuery, ApiError> {
    match q {
        QueryInput::Ids(_) => CnfQuery::term(ids_of(ci, q)?).map_err(|e| ApiError::from_core("query", e)),
        QueryInput::Text(src) => {
            let expr = cnf::parse(src).map_err(|e| ApiError::from_core("query", e))?;
            expr.resolve(|text| {
                ci.tokenizer.tokenize(text).map_err(|e| infgram_core::Error::InvalidArgument(e.to_string()))
            })
            .map_err(|e| ApiError::from_core("query", e))
        }
    }
}

fn search_docs(ci: &CorpusIndex, req: &QueryRequest, opts: &ExecOptions) -> Result<SearchDocsResult, ApiError> {
    let q = cnf_query(ci, &req.query)?;
    let sopts = SearchOptions { maxnum: req.maxnum.unwrap_or(SearchOptions::default().maxnum), seed: req.seed.unwrap_or(0) };
    let r = ci.index.search_docs(&q, sopts).map_err(|e| ApiError::from_core("maxnum", e))?;
    let documents = r.documents.iter().map(|d| document_out(ci, d, opts.snippet_tokens)).collect();
    Ok(SearchDocsResult { clauses: q.clauses, total: r.total, sampled: r.total > r.documents.len() as u64, documents })
}

/// A document with its tokens cut to `budget`, centered on the first match.
pub fn document_out(ci: &CorpusIndex, d: &DocRef, budget: usize) -> DocumentOut {
    let toks = ci.index.document_tokens(d);
    let len = toks.len();
    let first = d.matches.iter().filter_map(|m| m.positions.first()).min().copied().unwrap_or(0) as usize;
    let budget = budget.max(1);
    let start = if len <= budget { 0 } else { first.saturating_sub(budget / 2).min(len - budget) };
    let end = (start + budget).min(len);
    let snippet = toks[start..end].to_vec();
    DocumentOut {
        directory: d.part,
        doc: d.doc,
        start: d.start,
        end: d.end,
        token_count: len as u64,
        metadata: d.metadata.clone(),
        snippet_start: start as u64,
        snippet_text: ci.tokenizer.detokenize(&snippet),
        snippet,
        truncated: end - start < len,
        matches: d
            .matches
            .iter()
            .map(|m| TermMatchOut { clause: m.clause, term: m.term, positions: m.positions.clone() })
            .collect(),
    }
}

/// Occurrence locations of an n-gram (additive directories only).
pub fn positions(ci: &CorpusIndex, q: &QueryInput, limit: usize, seed: u64) -> Result<PositionsResult, ApiError> {
    let tokens = ids_of(ci, q)?;
    let p = ci.index.positions(&tokens, limit, seed).map_err(|e| ApiError::from_core("query", e))?;
    let mut locations = Vec::with_capacity(p.locations.len());
    for l in &p.locations {
        let d = ci.index.doc_of(l.part, l.offset).map_err(|e| ApiError::Internal(e.to_string()))?;
        locations.push(LocationOut { directory: l.part, offset: l.offset, doc: d.doc, doc_offset: (l.offset - d.start) / 2 });
    }
    Ok(PositionsResult { tokens, total: p.total, sampled: p.total > p.locations.len() as u64, locations })
}

/// The response envelope around a result payload.
pub fn envelope(query_type: QueryType, index: &str, result: Value, latency_ms: f64) -> Value {
    serde_json::json!({
        "v": SCHEMA_VERSION,
        "query_type": query_type.name(),
        "index": index,
        "result": result,
        "latency_ms": latency_ms,
    })
}

pub fn error_envelope(e: &ApiError) -> Value {
    serde_json::json!({ "v": SCHEMA_VERSION, "error": e.to_json() })
}

/// Execute and time a request.
pub fn execute_timed(ci: &CorpusIndex, req: &QueryRequest, opts: &ExecOptions) -> (Result<Value, ApiError>, f64) {
    let t = Instant::now();
    let r = execute(ci, req, opts);
    (r, t.elapsed().as_secs_f64() * 1e3)
}

