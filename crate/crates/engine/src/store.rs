//! Opening index directories as a memory-mapped, read-only [`CorpusIndex`].

use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use infgram_core::index::DEFAULT_TERM_CEILING;
use infgram_core::{DocTable, Index, IndexStats, Part, ShardTable, Sign};
use memmap2::Mmap;
use serde::Serialize;

use crate::ingest::{DOC_META_FILE, DOC_OFFSETS_FILE, META_OFFSETS_FILE, TOKENS_FILE};
use crate::manifest::Manifest;
use crate::tokenizer::Tokenizer;

/// Read-only file contents; empty files are not mapped.
#[derive(Debug)]
pub enum Bytes {
    Map(Mmap),
    Empty,
}

impl AsRef<[u8]> for Bytes {
    fn as_ref(&self) -> &[u8] {
        match self {
            Bytes::Map(m) => m,
            Bytes::Empty => &[],
        }
    }
}

pub fn map_file(path: &Path) -> Result<Bytes> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    if file.metadata()?.len() == 0 {
        return Ok(Bytes::Empty);
    }
    // SAFETY: index files are written once and never modified while open.
    let map = unsafe { Mmap::map(&file) }.with_context(|| format!("mapping {}", path.display()))?;
    Ok(Bytes::Map(map))
}

#[derive(Debug, Clone)]
pub struct IndexDir {
    pub path: PathBuf,
    pub sign: Sign,
    pub manifest: Manifest,
}

/// One or more signed index directories queried as a single corpus.
#[derive(Debug)]
pub struct CorpusIndex {
    pub dirs: Vec<IndexDir>,
    pub index: Index<Bytes>,
    pub tokenizer: Tokenizer,
}

/// Parse `a,-b,+c` into signed directories.
pub fn parse_index_list(spec: &str) -> Result<Vec<(PathBuf, Sign)>> {
    let out: Vec<(PathBuf, Sign)> = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s.as_bytes()[0] {
            b'-' => (PathBuf::from(&s[1..]), Sign::Minus),
            b'+' => (PathBuf::from(&s[1..]), Sign::Plus),
            _ => (PathBuf::from(s), Sign::Plus),
        })
        .collect();
    if out.is_empty() {
        bail!("no index directories given");
    }
    Ok(out)
}

fn open_part(dir: &Path, sign: Sign, m: &Manifest) -> Result<Part<Bytes>> {
    if m.shards.is_empty() {
        bail!("{} has no suffix tables; run build-sa first", dir.display());
    }
    let tokens = map_file(&dir.join(TOKENS_FILE))?;
    if tokens.as_ref().len() as u64 != 2 * m.n {
        bail!("{}: {TOKENS_FILE} has {} bytes but N={}", dir.display(), tokens.as_ref().len(), m.n);
    }
    let offsets = map_file(&dir.join(DOC_OFFSETS_FILE))?;
    if offsets.as_ref().len() as u64 != 8 * (m.d + 1) {
        bail!("{}: {DOC_OFFSETS_FILE} does not hold D+1={} offsets", dir.display(), m.d + 1);
    }
    let mut shards = Vec::with_capacity(m.shards.len());
    for s in &m.shards {
        let table = map_file(&dir.join(&s.path))?;
        if table.as_ref().len() as u64 != s.n * s.p as u64 || s.end.checked_sub(s.start) != Some(2 * s.n) {
            bail!("{}: {} does not match its manifest entry", dir.display(), s.path);
        }
        shards.push(ShardTable { start: s.start, end: s.end, width: s.p, table });
    }
    let docs = DocTable {
        offsets,
        meta: map_file(&dir.join(DOC_META_FILE))?,
        meta_offsets: map_file(&dir.join(META_OFFSETS_FILE))?,
    };
    Part::new(sign, tokens, shards, docs).with_context(|| format!("opening {}", dir.display()))
}

impl CorpusIndex {
    pub fn open(dirs: &[(PathBuf, Sign)]) -> Result<Self> {
        Self::open_with_ceiling(dirs, DEFAULT_TERM_CEILING)
    }

    pub fn open_with_ceiling(dirs: &[(PathBuf, Sign)], term_ceiling: u64) -> Result<Self> {
        if dirs.is_empty() {
            bail!("no index directories given");
        }
        let mut opened = Vec::with_capacity(dirs.len());
        let mut parts = Vec::with_capacity(dirs.len());
        for (path, sign) in dirs {
            let manifest = Manifest::load(path)?;
            if let Some(first) = opened.first() {
                let first: &IndexDir = first;
                if first.manifest.tokenizer != manifest.tokenizer {
                    bail!(
                        "mixed tokenizers: {} uses {} but {} uses {}",
                        first.path.display(),
                        first.manifest.tokenizer,
                        path.display(),
                        manifest.tokenizer
                    );
                }
            }
            parts.push(open_part(path, *sign, &manifest)?);
            opened.push(IndexDir { path: path.clone(), sign: *sign, manifest });
        }
        let tokenizer = Tokenizer::load(&opened[0].path, &opened[0].manifest.tokenizer)?;
        let index = Index::new(parts)?.with_term_ceiling(term_ceiling);
        Ok(Self { dirs: opened, index, tokenizer })
    }

    /// Open from `a,-b` syntax.
    pub fn open_spec(spec: &str) -> Result<Self> {
        Self::open(&parse_index_list(spec)?)
    }

    pub fn stats(&self) -> StatsReport {
        let s: IndexStats = self.index.stats();
        let manifest_bytes: u64 = self
            .dirs
            .iter()
            .filter_map(|d| std::fs::metadata(d.path.join(crate::manifest::FILE_NAME)).ok())
            .map(|m| m.len())
            .sum();
        StatsReport {
            tokenizer: self.dirs[0].manifest.tokenizer.clone(),
            directories: self
                .dirs
                .iter()
                .map(|d| DirStats {
                    path: d.path.display().to_string(),
                    sign: if d.sign == Sign::Plus { 1 } else { -1 },
                    n: d.manifest.n,
                    d: d.manifest.d,
                    shards: d.manifest.shards.iter().map(|s| (s.n, s.p)).collect(),
                })
                .collect(),
            n: s.tokens,
            d: s.documents,
            shards: s.shards,
            index_bytes: s.index_bytes,
            bytes_on_disk: s.bytes_on_disk + manifest_bytes,
            bytes_per_token: s.bytes_per_token,
            ngram_lower_bound: s.ngram_lower_bound,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DirStats {
    pub path: String,
    pub sign: i8,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "D")]
    pub d: u64,
    /// `(N_s, P)` per shard.
    pub shards: Vec<(u64, usize)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StatsReport {
    pub tokenizer: String,
    pub directories: Vec<DirStats>,
    #[serde(rename = "N")]
    pub n: i128,
    #[serde(rename = "D")]
    pub d: i128,
    pub shards: usize,
    /// Token array plus suffix tables.
    pub index_bytes: u64,
    /// Every file of the index, offsets, metadata and manifest included.
    pub bytes_on_disk: u64,
    pub bytes_per_token: f64,
    pub ngram_lower_bound: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_lists() {
        let l = parse_index_list("a, -b,+c").unwrap();
        assert_eq!(
            l,
            [
                (PathBuf::from("a"), Sign::Plus),
                (PathBuf::from("b"), Sign::Minus),
                (PathBuf::from("c"), Sign::Plus)
            ]
        );
        assert!(parse_index_list(" , ").is_err());
    }
}
