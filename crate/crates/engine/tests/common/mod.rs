#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use infgram_core::table::MAX_SHARD_TOKENS;
use infgram_engine::build::{build_sa, BuildOptions};
use infgram_engine::ingest::ingest_tokens;
use infgram_engine::tokenizer::Tokenizer;
use sha2::{Digest, Sha256};

/// Ingest pretokenized documents into `root/name` and build its tables.
pub fn build_dir(root: &Path, name: &str, docs: &[Vec<u16>], opts: BuildOptions) -> PathBuf {
    let dir = root.join(name);
    ingest_tokens(&dir, &Tokenizer::Pretokenized, docs.iter().enumerate().map(|(i, d)| (d.clone(), format!("doc={i}"))))
        .unwrap();
    build_sa(&dir, opts).unwrap();
    dir
}

pub fn default_dir(root: &Path, name: &str, docs: &[Vec<u16>]) -> PathBuf {
    build_dir(root, name, docs, BuildOptions::default())
}

pub fn sharded(max_shard_tokens: u64) -> BuildOptions {
    BuildOptions { max_shard_tokens, width: None }
}

pub fn unsharded() -> BuildOptions {
    BuildOptions { max_shard_tokens: MAX_SHARD_TOKENS, width: None }
}

/// SHA-256 of every file in `dir`, by name.
pub fn checksums(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        if e.file_type().unwrap().is_file() {
            let bytes = std::fs::read(e.path()).unwrap();
            let hex: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
            out.insert(e.file_name().to_string_lossy().into_owned(), hex);
        }
    }
    out
}

/// Write newline-delimited JSON records.
pub fn write_jsonl(path: &Path, rows: &[serde_json::Value]) {
    let body: String = rows.iter().map(|r| r.to_string() + "\n").collect();
    std::fs::write(path, body).unwrap();
}
