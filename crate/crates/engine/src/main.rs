use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use infgram_core::decontam::{ContaminationSpec, Membership};
use infgram_core::eval::InterpolationConfig;
use infgram_core::index::DEFAULT_TERM_CEILING;
use infgram_core::table::MAX_SHARD_TOKENS;
use serde::Serialize;

use infgram_engine::api::{self, ExecOptions, QueryInput, QueryRequest, QueryType, TokenInput, DEFAULT_SNIPPET_TOKENS};
use infgram_engine::build::{self, BuildOptions, DEFAULT_VERIFY_LIMIT};
use infgram_engine::eval_io::{self, Lambdas};
use infgram_engine::service::{self, AppState, ServiceConfig};
use infgram_engine::store::{parse_index_list, CorpusIndex};
use infgram_engine::tokenizer::{parse_ids, TokenizerKind};
use infgram_engine::{decontam_io, ingest};

#[derive(Parser)]
#[command(name = "engine", version, about = "n-gram / ∞-gram index engine")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct IndexArg {
    /// Index directories, comma separated; prefix `-` to subtract one.
    #[arg(long)]
    index: String,
    /// Count ceiling above which a CNF term is not materialized.
    #[arg(long, default_value_t = DEFAULT_TERM_CEILING)]
    term_ceiling: u64,
}

impl IndexArg {
    fn open(&self) -> Result<CorpusIndex> {
        CorpusIndex::open_with_ceiling(&parse_index_list(&self.index)?, self.term_ceiling)
    }
}

#[derive(Args)]
struct ContextArgs {
    #[command(flatten)]
    index: IndexArg,
    /// Context as text (tokenized with the index tokenizer) or token IDs.
    #[arg(long, allow_hyphen_values = true)]
    context: String,
    /// Token to predict; `EOD` is the end of document. Defaults to the last
    /// context token.
    #[arg(long)]
    token: Option<String>,
    /// Read the context and token as whitespace-separated token IDs.
    #[arg(long)]
    ids: bool,
}

#[derive(Args)]
struct InfgramOpts {
    /// Smallest count for a context suffix to be used.
    #[arg(long, default_value_t = 1)]
    min_count: u64,
    /// Context tokens considered; 0 for unlimited.
    #[arg(long, default_value_t = infgram_core::lm::DEFAULT_MAX_CONTEXT)]
    max_context: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tokenize a record file into an index directory.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "reference-word")]
        tokenizer: TokenizerKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the suffix tables of an ingested directory.
    BuildSa {
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value_t = MAX_SHARD_TOKENS)]
        max_shard_tokens: u64,
        /// Force a pointer width in bytes.
        #[arg(long)]
        width: Option<usize>,
    },
    /// Check the suffix tables of a built directory.
    Verify {
        #[arg(long)]
        index: PathBuf,
        /// Shards with at most this many entries are checked in full.
        #[arg(long, default_value_t = DEFAULT_VERIFY_LIMIT)]
        full_limit: u64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Token and document totals, sizes and the unique n-gram lower bound.
    Stats {
        #[command(flatten)]
        index: IndexArg,
    },
    Count {
        #[command(flatten)]
        index: IndexArg,
        #[arg(long, allow_hyphen_values = true)]
        query: String,
        #[arg(long)]
        ids: bool,
    },
    Positions {
        #[command(flatten)]
        index: IndexArg,
        #[arg(long, allow_hyphen_values = true)]
        query: String,
        #[arg(long)]
        ids: bool,
        #[arg(long, default_value_t = 10)]
        limit: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// CNF document search: `(a OR b) AND c`, terms as IDs or quoted text.
    Search {
        #[command(flatten)]
        index: IndexArg,
        #[arg(long, allow_hyphen_values = true)]
        query: String,
        #[arg(long, default_value_t = 10)]
        maxnum: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SNIPPET_TOKENS)]
        snippet_tokens: usize,
    },
    /// Fixed-order n-gram probability.
    Prob {
        #[command(flatten)]
        ctx: ContextArgs,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Fixed-order next-token distribution.
    Dist {
        #[command(flatten)]
        ctx: ContextArgs,
        #[arg(long)]
        n: Option<usize>,
    },
    InfgramProb {
        #[command(flatten)]
        ctx: ContextArgs,
        #[command(flatten)]
        opts: InfgramOpts,
    },
    InfgramDist {
        #[command(flatten)]
        ctx: ContextArgs,
        #[command(flatten)]
        opts: InfgramOpts,
    },
    /// Perplexity of the ∞-gram interpolated with external probabilities.
    Ppl {
        #[command(flatten)]
        index: IndexArg,
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        neural: PathBuf,
        #[arg(long, requires = "lambda2")]
        lambda1: Option<f64>,
        #[arg(long, requires = "lambda1")]
        lambda2: Option<f64>,
        /// Validation documents for tuning the lambdas on the default grid.
        #[arg(long, requires = "tune_neural", conflicts_with = "lambda1")]
        tune_docs: Option<PathBuf>,
        #[arg(long, requires = "tune_docs")]
        tune_neural: Option<PathBuf>,
    },
    /// Token-wise agreement of the ∞-gram with documents.
    Agree {
        #[command(flatten)]
        index: IndexArg,
        #[arg(long)]
        docs: PathBuf,
        /// Also score a fixed-order n-gram model.
        #[arg(long)]
        fixed_n: Option<usize>,
        #[arg(long, default_value_t = infgram_core::lm::DEFAULT_MAX_CONTEXT)]
        max_context: usize,
        /// JSON report; bucket tables go next to it as `.effective_n.tsv`
        /// and `.grid.tsv`.
        #[arg(long)]
        report: PathBuf,
    },
    /// Remove corpus records whose word n-grams mostly occur in the eval set.
    Decontam {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        eval: PathBuf,
        #[arg(long, default_value_t = 13)]
        n: usize,
        #[arg(long, default_value_t = 0.8)]
        threshold: f64,
        #[arg(long)]
        lowercase: bool,
        /// Store eval n-grams exactly instead of in a Bloom filter.
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = 1e-4)]
        fp_rate: f64,
        #[arg(long)]
        kept: PathBuf,
        #[arg(long)]
        removed: PathBuf,
        #[arg(long)]
        stats: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        /// TOML configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `name=dir[,-dir...]`, repeatable; used when there is no config.
        #[arg(long = "index")]
        indexes: Vec<String>,
        #[arg(long)]
        bind: Option<String>,
    },
}

fn print<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string(v)?);
    Ok(())
}

fn query_input(text: &str, ids: bool) -> Result<QueryInput> {
    Ok(if ids {
        QueryInput::Ids(parse_ids(text)?.into_iter().map(u64::from).collect())
    } else {
        QueryInput::Text(text.to_string())
    })
}

fn run_query(ci: &CorpusIndex, req: &QueryRequest, opts: &ExecOptions) -> Result<()> {
    let result = api::execute(ci, req, opts)?;
    print(&result)
}

fn context_request(ctx: &ContextArgs, qt: QueryType) -> Result<(CorpusIndex, QueryRequest)> {
    let ci = ctx.index.open()?;
    let mut req = QueryRequest::new(qt, query_input(&ctx.context, ctx.ids)?);
    req.token = match &ctx.token {
        None => None,
        Some(t) if t == "EOD" => Some(TokenInput::Text(t.clone())),
        Some(t) if ctx.ids => Some(TokenInput::Id(t.parse().with_context(|| format!("{t:?} is not a token ID"))?)),
        Some(t) => Some(TokenInput::Text(t.clone())),
    };
    Ok((ci, req))
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Ingest { input, tokenizer, out } => print(&manifest_summary(&ingest::ingest(&input, tokenizer, &out)?)),
        Cmd::BuildSa { index, max_shard_tokens, width } => {
            let m = build::build_sa(&index, BuildOptions { max_shard_tokens, width })?;
            print(&manifest_summary(&m))
        }
        Cmd::Verify { index, full_limit, samples, seed } => {
            let reports = build::verify(&index, full_limit, samples, seed)?;
            let failed = reports.iter().filter(|r| !r.passed()).count();
            for (k, r) in reports.iter().enumerate() {
                print(&serde_json::json!({
                    "shard": k,
                    "passed": r.passed(),
                    "entries": r.entries,
                    "pairs_checked": r.pairs_checked,
                    "full": r.full,
                    "violation": r.violation.as_ref().map(|v| format!("{v:?}")),
                }))?;
            }
            if failed > 0 {
                bail!("{failed} shard(s) failed verification");
            }
            Ok(())
        }
        Cmd::Stats { index } => print(&index.open()?.stats()),
        Cmd::Count { index, query, ids } => {
            let ci = index.open()?;
            run_query(&ci, &QueryRequest::new(QueryType::Count, query_input(&query, ids)?), &ExecOptions::default())
        }
        Cmd::Positions { index, query, ids, limit, seed } => {
            let ci = index.open()?;
            print(&api::positions(&ci, &query_input(&query, ids)?, limit, seed)?)
        }
        Cmd::Search { index, query, maxnum, seed, snippet_tokens } => {
            let ci = index.open()?;
            let mut req = QueryRequest::new(QueryType::SearchDocs, QueryInput::Text(query));
            req.maxnum = Some(maxnum);
            req.seed = Some(seed);
            run_query(&ci, &req, &ExecOptions { snippet_tokens })
        }
        Cmd::Prob { ctx, n } => {
            let (ci, mut req) = context_request(&ctx, QueryType::NgramProb)?;
            req.n = n;
            run_query(&ci, &req, &ExecOptions::default())
        }
        Cmd::Dist { ctx, n } => {
            let (ci, mut req) = context_request(&ctx, QueryType::NgramDist)?;
            req.n = n;
            run_query(&ci, &req, &ExecOptions::default())
        }
        Cmd::InfgramProb { ctx, opts } => {
            let (ci, mut req) = context_request(&ctx, QueryType::InfgramProb)?;
            req.min_count = Some(opts.min_count);
            req.max_context = Some(opts.max_context);
            run_query(&ci, &req, &ExecOptions::default())
        }
        Cmd::InfgramDist { ctx, opts } => {
            let (ci, mut req) = context_request(&ctx, QueryType::InfgramDist)?;
            req.min_count = Some(opts.min_count);
            req.max_context = Some(opts.max_context);
            run_query(&ci, &req, &ExecOptions::default())
        }
        Cmd::Ppl { index, docs, neural, lambda1, lambda2, tune_docs, tune_neural } => {
            let ci = index.open()?;
            let lambdas = match (lambda1, lambda2, &tune_docs, &tune_neural) {
                (Some(a), Some(b), _, _) => Lambdas::Fixed(InterpolationConfig::new(a, b)?),
                (_, _, Some(d), Some(n)) => Lambdas::Tune { docs: d, neural: n },
                _ => bail!("give --lambda1 and --lambda2, or --tune-docs and --tune-neural"),
            };
            print(&eval_io::run_ppl(&ci, &docs, &neural, lambdas)?)
        }
        Cmd::Agree { index, docs, fixed_n, max_context, report } => {
            let ci = index.open()?;
            let cap = (max_context > 0).then_some(max_context);
            let r = eval_io::run_agree(&ci, &docs, fixed_n, cap)?;
            std::fs::write(&report, serde_json::to_string_pretty(&r)? + "\n")
                .with_context(|| format!("writing {}", report.display()))?;
            let (by_n, grid) = eval_io::bucket_tables(&r);
            std::fs::write(report.with_extension("effective_n.tsv"), by_n)?;
            std::fs::write(report.with_extension("grid.tsv"), grid)?;
            print(&serde_json::json!({
                "total_tokens": r.total_tokens,
                "agree_tokens": r.agree_tokens,
                "overall_rate": r.overall_rate,
                "sparse_rate": r.sparse_rate,
                "fixed_n": r.fixed_n,
                "report": report.display().to_string(),
            }))
        }
        Cmd::Decontam { corpus, eval, n, threshold, lowercase, exact, fp_rate, kept, removed, stats } => {
            let spec = ContaminationSpec { n, threshold, lowercase };
            spec.validate()?;
            let mode = if exact { Membership::Exact } else { Membership::Bloom { fp_rate } };
            let out = decontam_io::Outputs { kept: &kept, removed: &removed, stats: &stats };
            print(&decontam_io::run(&corpus, &eval, &spec, mode, out)?)
        }
        Cmd::Serve { config, indexes, bind } => {
            let mut cfg = match config {
                Some(p) => ServiceConfig::load(&p)?,
                None => {
                    let mut map = BTreeMap::new();
                    for spec in &indexes {
                        let (name, dirs) = spec.split_once('=').with_context(|| format!("--index {spec:?} is not name=dir"))?;
                        map.insert(name.to_string(), service::IndexSpec::List(dirs.to_string()));
                    }
                    if map.is_empty() {
                        bail!("give --config or at least one --index name=dir");
                    }
                    ServiceConfig {
                        bind: "127.0.0.1:8080".into(),
                        term_ceiling: DEFAULT_TERM_CEILING,
                        snippet_tokens: DEFAULT_SNIPPET_TOKENS,
                        indexes: map,
                    }
                }
            };
            if let Some(b) = bind {
                cfg.bind = b;
            }
            let state = Arc::new(AppState::open(&cfg)?);
            tokio::runtime::Runtime::new()?.block_on(service::serve(state, &cfg.bind))
        }
    }
}

fn manifest_summary(m: &infgram_engine::manifest::Manifest) -> serde_json::Value {
    serde_json::json!({
        "tokenizer": m.tokenizer,
        "N": m.n,
        "D": m.d,
        "shards": m.shards.iter().map(|s| serde_json::json!({"path": s.path, "N": s.n, "P": s.p})).collect::<Vec<_>>(),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
