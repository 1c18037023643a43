//! Write `tokens.bin`, `doc.offsets`, `doc.meta`, `meta.offsets` and the
//! initial manifest for a document collection.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use infgram_core::token::{check_document, SEPARATOR};
use infgram_core::Token;

use crate::manifest::Manifest;
use crate::records::read_records;
use crate::tokenizer::{split_words, Tokenizer, TokenizerKind, Vocab, VOCAB_FILE};

pub const TOKENS_FILE: &str = "tokens.bin";
pub const DOC_OFFSETS_FILE: &str = "doc.offsets";
pub const DOC_META_FILE: &str = "doc.meta";
pub const META_OFFSETS_FILE: &str = "meta.offsets";

/// Ingest a record file into `out`, building the vocabulary first when
/// the tokenizer needs one.
pub fn ingest(input: &Path, kind: TokenizerKind, out: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut guard = Cleanup::new(out);
    let tokenizer = match kind {
        TokenizerKind::Pretokenized => Tokenizer::Pretokenized,
        TokenizerKind::ReferenceWord => {
            let vocab = build_vocab(input)?;
            guard.written(VOCAB_FILE);
            std::fs::write(out.join(VOCAB_FILE), vocab.render())?;
            Tokenizer::ReferenceWord(vocab)
        }
    };
    let docs = read_records(input)?.map(|r| {
        let (line, _, rec) = r?;
        let toks = rec.tokens(&tokenizer).with_context(|| format!("{}:{line}", input.display()))?;
        Ok((toks, rec.metadata_line()))
    });
    let mut manifest = write_corpus(out, &tokenizer, docs, &mut guard)?;
    manifest.params.insert("ingest.input".into(), input.display().to_string());
    manifest.store(out)?;
    guard.disarm();
    Ok(manifest)
}

/// Write already tokenized documents (with metadata lines) into `out`.
pub fn ingest_tokens(
    out: &Path,
    tokenizer: &Tokenizer,
    docs: impl IntoIterator<Item = (Vec<Token>, String)>,
) -> Result<Manifest> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut guard = Cleanup::new(out);
    if let Tokenizer::ReferenceWord(v) = tokenizer {
        guard.written(VOCAB_FILE);
        std::fs::write(out.join(VOCAB_FILE), v.render())?;
    }
    let manifest = write_corpus(out, tokenizer, docs.into_iter().map(Ok), &mut guard)?;
    manifest.store(out)?;
    guard.disarm();
    Ok(manifest)
}

fn build_vocab(input: &Path) -> Result<Vocab> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for r in read_records(input)? {
        let (line, _, rec) = r?;
        let Some(text) = rec.text else {
            bail!("{}:{line}: reference-word input needs a text field", input.display());
        };
        for w in split_words(&text) {
            *counts.entry(w.to_string()).or_default() += 1;
        }
    }
    Vocab::from_counts(counts)
}

fn write_corpus(
    out: &Path,
    tokenizer: &Tokenizer,
    docs: impl Iterator<Item = Result<(Vec<Token>, String)>>,
    guard: &mut Cleanup,
) -> Result<Manifest> {
    let mut open = |name: &'static str| -> Result<BufWriter<File>> {
        guard.written(name);
        let path = out.join(name);
        Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
    };
    let mut tokens = open(TOKENS_FILE)?;
    let mut offsets = open(DOC_OFFSETS_FILE)?;
    let mut meta = open(DOC_META_FILE)?;
    let mut meta_offsets = open(META_OFFSETS_FILE)?;
    guard.written(crate::manifest::FILE_NAME);

    let (mut pos, mut meta_pos, mut d) = (0u64, 0u64, 0u64);
    let mut buf = Vec::new();
    for (i, doc) in docs.enumerate() {
        let (toks, line) = doc?;
        check_document(&toks).with_context(|| format!("document {i}"))?;
        offsets.write_all(&pos.to_le_bytes())?;
        meta_offsets.write_all(&meta_pos.to_le_bytes())?;
        buf.clear();
        infgram_core::token::encode_into(&toks, &mut buf);
        buf.extend_from_slice(&SEPARATOR.to_be_bytes());
        tokens.write_all(&buf)?;
        pos += buf.len() as u64;
        let line = line.replace(['\n', '\r'], " ");
        meta.write_all(line.as_bytes())?;
        meta.write_all(b"\n")?;
        meta_pos += line.len() as u64 + 1;
        d += 1;
    }
    if d == 0 {
        bail!("no documents to ingest");
    }
    offsets.write_all(&pos.to_le_bytes())?;
    meta_offsets.write_all(&meta_pos.to_le_bytes())?;
    for w in [&mut tokens, &mut offsets, &mut meta, &mut meta_offsets] {
        w.flush()?;
        w.get_ref().sync_all()?;
    }
    Ok(Manifest::new(tokenizer.id(), pos / 2, d))
}

/// Deletes the files an ingest has started writing unless disarmed.
struct Cleanup {
    dir: PathBuf,
    files: Vec<&'static str>,
    armed: bool,
}

impl Cleanup {
    fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), files: Vec::new(), armed: true }
    }

    fn written(&mut self, name: &'static str) {
        self.files.push(name);
    }

    fn disarm(&mut self) {
        self.armed = false;
    }
}

impl Drop for Cleanup {
    fn drop(&mut self) {
        if self.armed {
            for f in &self.files {
                let _ = std::fs::remove_file(self.dir.join(f));
            }
        }
    }
}
