//! Decontaminate a record file against evaluation records.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use infgram_core::decontam::{overlap, ContaminationSpec, EvalNgramSet, FilterStats, Membership};

use crate::records::read_records;

pub struct Outputs<'a> {
    pub kept: &'a Path,
    pub removed: &'a Path,
    pub stats: &'a Path,
}

fn texts(path: &Path) -> Result<Vec<(String, String)>> {
    read_records(path)?
        .map(|r| {
            let (line, raw, rec) = r?;
            let text = rec.text.with_context(|| format!("{}:{line}: record has no text", path.display()))?;
            Ok((raw, text))
        })
        .collect()
}

/// Copy each corpus record to the kept or removed file and write stats.
pub fn run(corpus: &Path, eval: &Path, spec: &ContaminationSpec, mode: Membership, out: Outputs<'_>) -> Result<FilterStats> {
    let eval_docs = texts(eval)?;
    let set = EvalNgramSet::build(eval_docs.iter().map(|(_, t)| t.as_str()), spec, mode)?;
    drop(eval_docs);
    let create = |p: &Path| -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?))
    };
    let (mut kept, mut removed) = (create(out.kept)?, create(out.removed)?);
    let mut stats = FilterStats::default();
    for r in read_records(corpus)? {
        let (line, raw, rec) = r?;
        let text = rec.text.with_context(|| format!("{}:{line}: record has no text", corpus.display()))?;
        stats.total_docs += 1;
        if overlap(&text, &set, spec).contaminated(spec.threshold) {
            stats.filtered_docs += 1;
            writeln!(removed, "{raw}")?;
        } else {
            writeln!(kept, "{raw}")?;
        }
    }
    kept.flush()?;
    removed.flush()?;
    if stats.total_docs > 0 {
        stats.ratio_filtered = stats.filtered_docs as f64 / stats.total_docs as f64;
    }
    std::fs::write(out.stats, serde_json::to_string_pretty(&stats)? + "\n")
        .with_context(|| format!("writing {}", out.stats.display()))?;
    Ok(stats)
}
