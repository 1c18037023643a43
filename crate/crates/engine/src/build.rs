//! Suffix-table construction and verification for an ingested directory.

use std::path::Path;

use anyhow::{bail, Context, Result};
use infgram_core::table::{build_table, verify_table, ShardingPlan, VerifyReport, FULL_CHECK_LIMIT, MAX_SHARD_TOKENS};
use rayon::prelude::*;

use crate::ingest::{DOC_OFFSETS_FILE, TOKENS_FILE};
use crate::manifest::{Manifest, ShardEntry};
use crate::store::map_file;

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub max_shard_tokens: u64,
    /// Pointer width override; at least the minimum for each shard.
    pub width: Option<usize>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { max_shard_tokens: MAX_SHARD_TOKENS, width: None }
    }
}

pub fn table_file(k: usize) -> String {
    format!("table.{k}.bin")
}

fn read_offsets(dir: &Path) -> Result<Vec<u64>> {
    let raw = map_file(&dir.join(DOC_OFFSETS_FILE))?;
    let raw = raw.as_ref();
    if raw.len() % 8 != 0 {
        bail!("{DOC_OFFSETS_FILE} size {} is not a multiple of 8", raw.len());
    }
    Ok(raw.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Build one suffix table per shard and record them in the manifest.
///
/// Shards are built in parallel on the rayon pool; each needs roughly
/// `(8 + P) · N_s` bytes of working memory.
pub fn build_sa(dir: &Path, opts: BuildOptions) -> Result<Manifest> {
    let mut manifest = Manifest::load(dir)?;
    let tokens = map_file(&dir.join(TOKENS_FILE))?;
    let tokens = tokens.as_ref();
    if tokens.len() as u64 != 2 * manifest.n {
        bail!("{TOKENS_FILE} has {} bytes but the manifest says N={}", tokens.len(), manifest.n);
    }
    let offsets = read_offsets(dir)?;
    let plan = ShardingPlan::new(&offsets, opts.max_shard_tokens)?;
    let shards: Vec<ShardEntry> = (0..plan.shard_count())
        .into_par_iter()
        .map(|k| -> Result<ShardEntry> {
            let (start, end) = plan.shard(k);
            let (table, p) = build_table(&tokens[start as usize..end as usize], opts.width)?;
            let name = table_file(k);
            let tmp = dir.join(format!("{name}.tmp"));
            std::fs::write(&tmp, &table).with_context(|| format!("writing {}", tmp.display()))?;
            std::fs::rename(&tmp, dir.join(&name))?;
            Ok(ShardEntry { path: name, n: (end - start) / 2, p, start, end })
        })
        .collect::<Result<_>>()?;

    let mut k = shards.len();
    while dir.join(table_file(k)).exists() {
        std::fs::remove_file(dir.join(table_file(k)))?;
        k += 1;
    }
    manifest.shards = shards;
    manifest.params.insert("build.max_shard_tokens".into(), opts.max_shard_tokens.to_string());
    if let Some(w) = opts.width {
        manifest.params.insert("build.width".into(), w.to_string());
    }
    manifest.store(dir)?;
    Ok(manifest)
}

/// Check every shard of a built directory; sortedness is checked in full
/// for shards up to `full_limit` entries and on `samples` random pairs
/// otherwise.
pub fn verify(dir: &Path, full_limit: u64, samples: u64, seed: u64) -> Result<Vec<VerifyReport>> {
    let manifest = Manifest::load(dir)?;
    if manifest.shards.is_empty() {
        bail!("{} has no suffix tables; run build-sa first", dir.display());
    }
    let tokens = map_file(&dir.join(TOKENS_FILE))?;
    manifest
        .shards
        .iter()
        .map(|s| {
            let table = map_file(&dir.join(&s.path))?;
            let span = tokens
                .as_ref()
                .get(s.start as usize..s.end as usize)
                .with_context(|| format!("shard {} span exceeds {TOKENS_FILE}", s.path))?;
            Ok(verify_table(span, table.as_ref(), s.p, full_limit, samples, seed))
        })
        .collect()
}

pub const DEFAULT_VERIFY_LIMIT: u64 = FULL_CHECK_LIMIT;
