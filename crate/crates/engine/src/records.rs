//! Newline-delimited JSON document records.
//!
//! Each line is an object with `text` (or `tokens`, an array of IDs, for
//! pretokenized input) and optional `metadata`, either a string or an
//! object whose entries become `key=value` pairs joined by commas.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::{bail, Context, Result};
use infgram_core::Token;
use serde::Deserialize;
use serde_json::Value;

use crate::tokenizer::{check_id, Tokenizer};

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Record {
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub tokens: Option<Vec<u64>>,
    #[serde(default)]
    pub metadata: Value,
}

impl Record {
    pub fn metadata_line(&self) -> String {
        let line = match &self.metadata {
            Value::Null => String::new(),
            Value::String(s) => s.clone(),
            Value::Object(m) => m
                .iter()
                .map(|(k, v)| match v {
                    Value::String(s) => format!("{k}={s}"),
                    other => format!("{k}={other}"),
                })
                .collect::<Vec<_>>()
                .join(","),
            other => other.to_string(),
        };
        line.replace(['\n', '\r'], " ")
    }

    pub fn tokens(&self, tokenizer: &Tokenizer) -> Result<Vec<Token>> {
        match (&self.tokens, &self.text) {
            (Some(ids), _) => {
                if !matches!(tokenizer, Tokenizer::Pretokenized) {
                    bail!("record carries token IDs but the tokenizer is not pretokenized");
                }
                ids.iter().map(|&v| check_id(v)).collect()
            }
            (None, Some(text)) => tokenizer.tokenize(text),
            (None, None) => bail!("record has neither text nor tokens"),
        }
    }
}

/// Iterate over the records of a file as `(line number, raw line, record)`.
pub fn read_records(path: &Path) -> Result<impl Iterator<Item = Result<(usize, String, Record)>>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let display = path.display().to_string();
    Ok(BufReader::new(file).lines().enumerate().filter_map(move |(i, line)| {
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(anyhow::Error::new(e).context(format!("reading {display}")))),
        };
        if line.trim().is_empty() {
            return None;
        }
        Some(
            serde_json::from_str::<Record>(&line)
                .with_context(|| format!("{display}:{}: malformed record", i + 1))
                .map(|r| (i + 1, line, r)),
        )
    }))
}

/// Load all records of a file and tokenize them.
pub fn read_tokenized(path: &Path, tokenizer: &Tokenizer) -> Result<Vec<Vec<Token>>> {
    let mut out = Vec::new();
    for rec in read_records(path)? {
        let (line, _, rec) = rec?;
        out.push(rec.tokens(tokenizer).with_context(|| format!("{}:{line}", path.display()))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(s: &str) -> Record {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn metadata_lines() {
        assert_eq!(rec(r#"{"text":"a"}"#).metadata_line(), "");
        assert_eq!(rec(r#"{"text":"a","metadata":"src,1,http://x"}"#).metadata_line(), "src,1,http://x");
        assert_eq!(rec(r#"{"text":"a","metadata":{"source":"web","id":7}}"#).metadata_line(), "id=7,source=web");
        assert_eq!(rec(r#"{"text":"a","metadata":"x\ny"}"#).metadata_line(), "x y");
    }

    #[test]
    fn token_sources() {
        let r = rec(r#"{"tokens":[1,2,3]}"#);
        assert_eq!(r.tokens(&Tokenizer::Pretokenized).unwrap(), [1, 2, 3]);
        assert!(rec(r#"{"tokens":[70000]}"#).tokens(&Tokenizer::Pretokenized).is_err());
        assert_eq!(rec(r#"{"text":"4 5"}"#).tokens(&Tokenizer::Pretokenized).unwrap(), [4, 5]);
        assert!(rec(r#"{}"#).tokens(&Tokenizer::Pretokenized).is_err());
    }
}
