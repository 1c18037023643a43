//! Tokenizers: a frequency-ranked word vocabulary and a token-ID pass-through.
//!
//! `reference-word` splits text into runs of alphanumeric characters and
//! single punctuation characters, dropping whitespace. The vocabulary is
//! stored in `vocab.txt`, one word per line, where line `i` (from 0) has
//! ID `i + 1`; ID 0 is reserved for unknown words.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use infgram_core::token::MAX_TOKEN;
use infgram_core::{Token, UNK};
use sha2::{Digest, Sha256};

pub const VOCAB_FILE: &str = "vocab.txt";
pub const PRETOKENIZED: &str = "pretokenized";
pub const REFERENCE_WORD: &str = "reference-word";

/// Most words a vocabulary can hold: every ID except UNK and the separator.
pub const MAX_WORDS: usize = MAX_TOKEN as usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenizerKind {
    ReferenceWord,
    Pretokenized,
}

impl std::str::FromStr for TokenizerKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            REFERENCE_WORD => Ok(Self::ReferenceWord),
            PRETOKENIZED => Ok(Self::Pretokenized),
            _ => bail!("unknown tokenizer {s:?} (expected {REFERENCE_WORD} or {PRETOKENIZED})"),
        }
    }
}

pub fn split_words(text: &str) -> impl Iterator<Item = &str> {
    let mut rest = text;
    std::iter::from_fn(move || {
        rest = rest.trim_start();
        let mut chars = rest.char_indices();
        let (_, first) = chars.next()?;
        let end = if first.is_alphanumeric() {
            chars.find(|(_, c)| !c.is_alphanumeric()).map_or(rest.len(), |(i, _)| i)
        } else {
            first.len_utf8()
        };
        let (word, tail) = rest.split_at(end);
        rest = tail;
        Some(word)
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    ids: HashMap<String, Token>,
}

impl Vocab {
    /// Rank words by descending frequency, ties by byte order.
    pub fn from_counts(counts: HashMap<String, u64>) -> Result<Self> {
        if counts.len() > MAX_WORDS {
            bail!("vocabulary overflow: {} distinct words, at most {MAX_WORDS} fit in 16-bit IDs", counts.len());
        }
        let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self::from_words(ranked.into_iter().map(|(w, _)| w).collect())
    }

    pub fn from_words(words: Vec<String>) -> Result<Self> {
        if words.len() > MAX_WORDS {
            bail!("vocabulary overflow: {} words, at most {MAX_WORDS} fit in 16-bit IDs", words.len());
        }
        let mut ids = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                bail!("vocabulary entry {i} is empty or contains whitespace");
            }
            if ids.insert(w.clone(), (i + 1) as Token).is_some() {
                bail!("vocabulary entry {w:?} is duplicated");
            }
        }
        Ok(Self { words, ids })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Token {
        self.ids.get(word).copied().unwrap_or(UNK)
    }

    pub fn word(&self, id: Token) -> Option<&str> {
        (id as usize).checked_sub(1).and_then(|i| self.words.get(i)).map(String::as_str)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for w in &self.words {
            s.push_str(w);
            s.push('\n');
        }
        s
    }

    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.render().as_bytes());
        hash[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tokenizer {
    ReferenceWord(Vocab),
    Pretokenized,
}

impl Tokenizer {
    /// Identifier stored in the manifest; indexes combine only when equal.
    pub fn id(&self) -> String {
        match self {
            Tokenizer::ReferenceWord(v) => format!("{REFERENCE_WORD}:{}", v.digest()),
            Tokenizer::Pretokenized => PRETOKENIZED.to_string(),
        }
    }

    pub fn tokenize(&self, text: &str) -> Result<Vec<Token>> {
        match self {
            Tokenizer::ReferenceWord(v) => Ok(split_words(text).map(|w| v.id(w)).collect()),
            Tokenizer::Pretokenized => parse_ids(text),
        }
    }

    pub fn detokenize(&self, tokens: &[Token]) -> Option<String> {
        match self {
            Tokenizer::ReferenceWord(v) => {
                Some(tokens.iter().map(|&t| v.word(t).unwrap_or("<unk>")).collect::<Vec<_>>().join(" "))
            }
            Tokenizer::Pretokenized => None,
        }
    }

    /// Load the tokenizer named by a manifest from its index directory.
    pub fn load(dir: &Path, id: &str) -> Result<Self> {
        if id == PRETOKENIZED {
            return Ok(Tokenizer::Pretokenized);
        }
        let Some(digest) = id.strip_prefix(REFERENCE_WORD).and_then(|s| s.strip_prefix(':')) else {
            bail!("unknown tokenizer id {id:?}");
        };
        let path = dir.join(VOCAB_FILE);
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let vocab = Vocab::from_words(text.lines().map(str::to_string).collect())?;
        if vocab.digest() != digest {
            bail!("{} does not match tokenizer id {id}", path.display());
        }
        Ok(Tokenizer::ReferenceWord(vocab))
    }
}

/// Whitespace-separated token IDs, each at most [`MAX_TOKEN`].
pub fn parse_ids(text: &str) -> Result<Vec<Token>> {
    text.split_whitespace().map(|w| check_id(w.parse::<u64>().with_context(|| format!("{w:?} is not a token ID"))?)).collect()
}

pub fn check_id(v: u64) -> Result<Token> {
    if v > MAX_TOKEN as u64 {
        bail!("token ID {v} is outside [0, {MAX_TOKEN}]");
    }
    Ok(v as Token)
}
