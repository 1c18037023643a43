//! The `manifest` file: UTF-8 `key=value` lines describing an index directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const FILE_NAME: &str = "manifest";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardEntry {
    pub path: String,
    /// Tokens covered, separators included.
    pub n: u64,
    /// Pointer width in bytes.
    pub p: usize,
    /// Byte span in `tokens.bin`.
    pub start: u64,
    pub end: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub version: u32,
    pub tokenizer: String,
    pub n: u64,
    pub d: u64,
    pub shards: Vec<ShardEntry>,
    /// Creation parameters and any keys this version does not interpret.
    pub params: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(tokenizer: String, n: u64, d: u64) -> Self {
        Self { version: FORMAT_VERSION, tokenizer, n, d, shards: Vec::new(), params: BTreeMap::new() }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "version={}", self.version);
        let _ = writeln!(s, "tokenizer={}", self.tokenizer);
        let _ = writeln!(s, "N={}", self.n);
        let _ = writeln!(s, "D={}", self.d);
        let _ = writeln!(s, "shards={}", self.shards.len());
        for (k, sh) in self.shards.iter().enumerate() {
            let _ = writeln!(s, "shard.{k}.path={}", sh.path);
            let _ = writeln!(s, "shard.{k}.N={}", sh.n);
            let _ = writeln!(s, "shard.{k}.P={}", sh.p);
            let _ = writeln!(s, "shard.{k}.start={}", sh.start);
            let _ = writeln!(s, "shard.{k}.end={}", sh.end);
        }
        for (k, v) in &self.params {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').with_context(|| format!("manifest line {}: missing '='", i + 1))?;
            if kv.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                bail!("manifest line {}: duplicate key {k}", i + 1);
            }
        }
        fn take<T: std::str::FromStr>(kv: &mut BTreeMap<String, String>, key: &str) -> Result<T> {
            let v = kv.remove(key).with_context(|| format!("manifest is missing {key}"))?;
            v.parse().map_err(|_| anyhow::anyhow!("manifest {key}={v} is not valid"))
        }
        let version: u32 = take(&mut kv, "version")?;
        if version != FORMAT_VERSION {
            bail!("unsupported manifest version {version}");
        }
        let tokenizer: String = take(&mut kv, "tokenizer")?;
        let n = take(&mut kv, "N")?;
        let d = take(&mut kv, "D")?;
        let count: usize = take(&mut kv, "shards")?;
        let mut shards = Vec::with_capacity(count);
        for k in 0..count {
            shards.push(ShardEntry {
                path: take(&mut kv, &format!("shard.{k}.path"))?,
                n: take(&mut kv, &format!("shard.{k}.N"))?,
                p: take(&mut kv, &format!("shard.{k}.P"))?,
                start: take(&mut kv, &format!("shard.{k}.start"))?,
                end: take(&mut kv, &format!("shard.{k}.end"))?,
            });
        }
        if let Some(k) = kv.keys().find(|k| k.starts_with("shard.")) {
            bail!("manifest has stray key {k}");
        }
        Ok(Self { version, tokenizer, n, d, shards, params: kv })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(FILE_NAME);
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Write through a temporary file so readers never see a partial manifest.
    pub fn store(&self, dir: &Path) -> Result<()> {
        let tmp = dir.join(format!("{FILE_NAME}.tmp"));
        std::fs::write(&tmp, self.render()).with_context(|| format!("writing {}", tmp.display()))?;
        std::fs::rename(&tmp, dir.join(FILE_NAME))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn round_trip() {
        let mut m = Manifest::new("pretokenized".into(), 10, 2);
        m.shards.push(ShardEntry { path: "table.0.bin".into(), n: 10, p: 1, start: 0, end: 20 });
        m.params.insert("max_shard_tokens".into(), "100".into());
        let text = m.render();
        assert!(text.contains("shard.0.P=1\n"));
        assert_eq!(Manifest::parse(&text).unwrap(), m);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Manifest::parse("version=1\n").is_err());
        assert!(Manifest::parse("version=2\ntokenizer=x\nN=1\nD=1\nshards=0\n").is_err());
        assert!(Manifest::parse("version=1\ntokenizer=x\nN=1\nD=1\nshards=0\nshard.3.N=4\n").is_err());
        assert!(Manifest::parse("version=1\nversion=1\n").is_err());
        assert!(Manifest::parse("garbage\n").is_err());
    }

    fn shard() -> impl Strategy<Value = ShardEntry> {
        ("[a-z0-9._]{1,12}", 0u64..1 << 40, 1usize..=8, 0u64..1 << 41, 0u64..1 << 41)
            .prop_map(|(path, n, p, start, end)| ShardEntry { path, n, p, start, end })
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(
            tokenizer in "[a-z0-9:-]{1,24}",
            n in any::<u64>(),
            d in any::<u64>(),
            shards in proptest::collection::vec(shard(), 0..5),
            params in proptest::collection::btree_map("[a-z]{1,6}\\.[a-z_]{1,8}", "[!-~]{0,16}", 0..6),
        ) {
            prop_assume!(params.keys().all(|k| !k.starts_with("shard.")));
            let m = Manifest { version: FORMAT_VERSION, tokenizer, n, d, shards, params };
            prop_assert_eq!(Manifest::parse(&m.render()).unwrap(), m);
        }
    }
}
