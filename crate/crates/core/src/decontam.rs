//! Whole-document decontamination by word n-gram overlap.
//!
//! A reference document is removed when at least `threshold` of its
//! distinct word n-grams occur in the evaluation set. Documents shorter
//! than `n` words have no n-grams and are kept.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::hash::BuildHasher;

use foldhash::fast::FixedState;
use hashbrown::HashSet;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContaminationSpec {
    pub n: usize,
    pub threshold: f64,
    pub lowercase: bool,
}

impl Default for ContaminationSpec {
    fn default() -> Self {
        Self { n: 13, threshold: 0.8, lowercase: false }
    }
}

impl ContaminationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::InvalidArgument("threshold must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Distinct whitespace-delimited word n-grams, each joined by single spaces.
pub fn word_ngrams(text: &str, spec: &ContaminationSpec) -> HashSet<String> {
    let lowered;
    let text = if spec.lowercase {
        lowered = text.to_lowercase();
        lowered.as_str()
    } else {
        text
    };
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut out = HashSet::new();
    if words.len() < spec.n {
        return out;
    }
    for w in words.windows(spec.n) {
        out.insert(w.join(" "));
    }
    out
}

/// Bloom filter over strings with double hashing.
#[derive(Debug, Clone)]
pub struct BloomFilter {
    bits: Vec<u64>,
    num_bits: u64,
    hashes: u32,
}

const SEED_A: u64 = 0x9E37_79B9_7F4A_7C15;
const SEED_B: u64 = 0xC2B2_AE3D_27D4_EB4F;

impl BloomFilter {
    /// Size the filter for `items` insertions at false-positive rate `fp_rate`.
    pub fn with_rate(items: usize, fp_rate: f64) -> Self {
        let items = items.max(1) as f64;
        let ln2 = core::f64::consts::LN_2;
        let m = libm::ceil(-items * libm::log(fp_rate) / (ln2 * ln2)).max(64.0);
        let k = libm::round(m / items * ln2).max(1.0);
        let num_bits = m as u64;
        Self { bits: vec![0; num_bits.div_ceil(64) as usize], num_bits, hashes: k as u32 }
    }

    fn probes(&self, item: &str) -> impl Iterator<Item = u64> + '_ {
        let h1 = FixedState::with_seed(SEED_A).hash_one(item);
        let h2 = FixedState::with_seed(SEED_B).hash_one(item) | 1;
        (0..self.hashes as u64).map(move |i| h1.wrapping_add(i.wrapping_mul(h2)) % self.num_bits)
    }

    pub fn insert(&mut self, item: &str) {
        let probes: Vec<u64> = self.probes(item).collect();
        for b in probes {
            self.bits[(b / 64) as usize] |= 1 << (b % 64);
        }
    }

    pub fn contains(&self, item: &str) -> bool {
        self.probes(item).all(|b| self.bits[(b / 64) as usize] >> (b % 64) & 1 == 1)
    }

    pub fn num_bits(&self) -> u64 {
        self.num_bits
    }

    pub fn num_hashes(&self) -> u32 {
        self.hashes
    }
}

/// Membership structure over the evaluation set's n-grams.
#[derive(Debug, Clone)]
pub enum EvalNgramSet {
    Exact(HashSet<String>),
    Bloom(BloomFilter),
}

/// How to store the evaluation n-grams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Membership {
    Exact,
    /// Probabilistic with the given false-positive rate; never a false negative.
    Bloom { fp_rate: f64 },
}

impl EvalNgramSet {
    pub fn build<'t>(eval_docs: impl IntoIterator<Item = &'t str>, spec: &ContaminationSpec, mode: Membership) -> Result<Self> {
        spec.validate()?;
        let mut all: HashSet<String> = HashSet::new();
        let mut any_doc = false;
        for d in eval_docs {
            any_doc = true;
            all.extend(word_ngrams(d, spec));
        }
        if !any_doc {
            return Err(Error::NoDocuments);
        }
        Ok(match mode {
            Membership::Exact => EvalNgramSet::Exact(all),
            Membership::Bloom { fp_rate } => {
                if !(fp_rate > 0.0 && fp_rate < 1.0) {
                    return Err(Error::InvalidArgument("false-positive rate must lie in (0, 1)".into()));
                }
                let mut f = BloomFilter::with_rate(all.len(), fp_rate);
                for g in &all {
                    f.insert(g);
                }
                EvalNgramSet::Bloom(f)
            }
        })
    }

    pub fn contains(&self, ngram: &str) -> bool {
        match self {
            EvalNgramSet::Exact(s) => s.contains(ngram),
            EvalNgramSet::Bloom(f) => f.contains(ngram),
        }
    }
}

/// Overlap of one document with the evaluation set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Overlap {
    pub total: usize,
    pub contained: usize,
}

impl Overlap {
    /// Removal rule, inclusive at the threshold.
    pub fn contaminated(&self, threshold: f64) -> bool {
        if self.total == 0 {
            return false;
        }
        let ratio = self.contained as f64 / self.total as f64;
        ratio >= threshold - 1e-12
    }
}

pub fn overlap(text: &str, set: &EvalNgramSet, spec: &ContaminationSpec) -> Overlap {
    let grams = word_ngrams(text, spec);
    Overlap { total: grams.len(), contained: grams.iter().filter(|g| set.contains(g)).count() }
}

/// Document totals in the shape of a per-corpus decontamination table.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FilterStats {
    pub total_docs: u64,
    pub filtered_docs: u64,
    pub ratio_filtered: f64,
}

/// Split documents into kept and removed indices.
pub fn filter_corpus<'t>(
    docs: impl IntoIterator<Item = &'t str>,
    set: &EvalNgramSet,
    spec: &ContaminationSpec,
) -> (Vec<usize>, Vec<usize>, FilterStats) {
    let (mut kept, mut removed) = (Vec::new(), Vec::new());
    for (i, d) in docs.into_iter().enumerate() {
        if overlap(d, set, spec).contaminated(spec.threshold) {
            removed.push(i);
        } else {
            kept.push(i);
        }
    }
    let total = (kept.len() + removed.len()) as u64;
    let stats = FilterStats {
        total_docs: total,
        filtered_docs: removed.len() as u64,
        ratio_filtered: if total == 0 { 0.0 } else { removed.len() as f64 / total as f64 },
    };
    (kept, removed, stats)
}
