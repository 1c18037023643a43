//! Conjunctive-normal-form document search.
//!
//! Text syntax: a query is clauses joined by `AND`; a clause is terms joined
//! by `OR`, optionally parenthesized; a term is a run of token IDs, bare
//! words and double-quoted strings that together form one n-gram. `OR`
//! binds tighter than `AND`.
//!
//! ```text
//! ("natural language processing" OR "artificial intelligence") AND (deep learning OR 17 23)
//! ```

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::index::{Index, Sign};
use crate::search::{DocRef, TermMatch};
use crate::token::{self, Token, MAX_TOKEN};

/// Piece of a term before tokenization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Atom {
    Ids(Vec<Token>),
    Text(String),
}

/// Parsed but untokenized CNF expression: clauses of terms of atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfExpr {
    pub clauses: Vec<Vec<Vec<Atom>>>,
}

/// A resolved CNF query over token IDs.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CnfQuery {
    pub clauses: Vec<Vec<Vec<Token>>>,
}

impl CnfQuery {
    pub fn new(clauses: Vec<Vec<Vec<Token>>>) -> Result<Self> {
        if clauses.is_empty() || clauses.iter().any(|c| c.is_empty()) {
            return Err(Error::EmptyQuery);
        }
        for term in clauses.iter().flatten() {
            token::check_query(term)?;
        }
        Ok(Self { clauses })
    }

    /// A single-term query.
    pub fn term(t: Vec<Token>) -> Result<Self> {
        Self::new(alloc::vec![alloc::vec![t]])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    And,
    Or,
    Atom(Atom),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == b'(' {
            out.push((i, Tok::LParen));
            i += 1;
        } else if c == b')' {
            out.push((i, Tok::RParen));
            i += 1;
        } else if c == b'"' {
            let start = i;
            let close = src[i + 1..]
                .find('"')
                .ok_or(Error::Syntax { pos: start, msg: "unterminated quote".to_string() })?;
            let text = &src[i + 1..i + 1 + close];
            out.push((start, Tok::Atom(Atom::Text(text.to_string()))));
            i += close + 2;
        } else {
            let start = i;
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() && !matches!(bytes[i], b'(' | b')' | b'"') {
                i += 1;
            }
            let word = &src[start..i];
            let tok = match word {
                "AND" => Tok::And,
                "OR" => Tok::Or,
                _ => match word.parse::<u32>() {
                    Ok(id) if id <= MAX_TOKEN as u32 => Tok::Atom(Atom::Ids(alloc::vec![id as Token])),
                    Ok(id) => {
                        return Err(Error::Syntax { pos: start, msg: alloc::format!("token id {id} out of range") })
                    }
                    Err(_) => Tok::Atom(Atom::Text(word.to_string())),
                },
            };
            out.push((start, tok));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, msg: &str) -> Result<T> {
        Err(Error::Syntax { pos: self.pos(), msg: msg.to_string() })
    }

    fn query(&mut self) -> Result<CnfExpr> {
        let mut clauses = alloc::vec![self.disjunction()?];
        while self.peek() == Some(&Tok::And) {
            self.at += 1;
            clauses.push(self.disjunction()?);
        }
        if self.peek().is_some() {
            return self.err("expected AND or end of query");
        }
        Ok(CnfExpr { clauses })
    }

    fn disjunction(&mut self) -> Result<Vec<Vec<Atom>>> {
        let mut terms = self.primary()?;
        while self.peek() == Some(&Tok::Or) {
            self.at += 1;
            terms.extend(self.primary()?);
        }
        Ok(terms)
    }

    fn primary(&mut self) -> Result<Vec<Vec<Atom>>> {
        match self.peek() {
            Some(Tok::LParen) => {
                self.at += 1;
                let inner = self.disjunction()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.err("expected ')' (AND is not allowed inside a clause)");
                }
                self.at += 1;
                Ok(inner)
            }
            Some(Tok::Atom(_)) => {
                let mut atoms = Vec::new();
                while let Some(Tok::Atom(a)) = self.peek() {
                    atoms.push(a.clone());
                    self.at += 1;
                }
                Ok(alloc::vec![atoms])
            }
            _ => self.err("expected a term"),
        }
    }
}

/// Parse the CNF text syntax.
pub fn parse(src: &str) -> Result<CnfExpr> {
    let toks = lex(src)?;
    if toks.is_empty() {
        return Err(Error::EmptyQuery);
    }
    Parser { toks, at: 0, end: src.len() }.query()
}

impl CnfExpr {
    /// Turn atoms into token IDs, tokenizing text atoms with `tokenize`.
    pub fn resolve(&self, mut tokenize: impl FnMut(&str) -> Result<Vec<Token>>) -> Result<CnfQuery> {
        let mut clauses = Vec::with_capacity(self.clauses.len());
        for clause in &self.clauses {
            let mut terms = Vec::with_capacity(clause.len());
            for atoms in clause {
                let mut term = Vec::new();
                for a in atoms {
                    match a {
                        Atom::Ids(ids) => term.extend_from_slice(ids),
                        Atom::Text(t) => term.extend(tokenize(t)?),
                    }
                }
                terms.push(term);
            }
            clauses.push(terms);
        }
        CnfQuery::new(clauses)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    pub maxnum: usize,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { maxnum: 10, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DocSearch {
    /// Matching documents before sampling.
    pub total: u64,
    /// Up to `maxnum` documents, ordered by (part, document).
    pub documents: Vec<DocRef>,
}

fn find_all(hay: &[Token], needle: &[Token]) -> Vec<u64> {
    if needle.len() > hay.len() {
        return Vec::new();
    }
    hay.windows(needle.len())
        .enumerate()
        .filter(|(_, w)| *w == needle)
        .map(|(i, _)| i as u64)
        .collect()
}

type DocKey = (usize, u64);

impl<B: AsRef<[u8]>> Index<B> {
    /// Documents of the additive parts in which every clause has a term
    /// present.
    ///
    /// Clauses whose terms all stay within the index's per-term ceiling are
    /// materialized as document sets and intersected. A clause with every
    /// term above the ceiling is rejected as too frequent; one with only
    /// some terms above it is checked by scanning the surviving candidates,
    /// which requires at least one materialized clause. Matches above
    /// `maxnum` are sampled with `ChaCha8Rng::seed_from_u64(seed)`.
    pub fn search_docs(&self, q: &CnfQuery, opts: SearchOptions) -> Result<DocSearch> {
        if opts.maxnum == 0 {
            return Err(Error::InvalidArgument("maxnum must be at least 1".into()));
        }
        let ceiling = self.term_ceiling();
        let mut materialized: Option<BTreeSet<DocKey>> = None;
        let mut deferred = Vec::new();
        for (ci, clause) in q.clauses.iter().enumerate() {
            let mut counts = Vec::with_capacity(clause.len());
            for term in clause {
                let segs = self.find_segments(term, None)?;
                let c: u64 = segs
                    .ranges
                    .iter()
                    .filter(|r| self.parts()[r.part].sign == Sign::Plus)
                    .map(|r| r.width())
                    .sum();
                counts.push(c);
            }
            if counts.iter().all(|&c| c > ceiling) {
                return Err(Error::ClauseTooFrequent { clause: ci, ceiling });
            }
            if counts.iter().any(|&c| c > ceiling) {
                deferred.push(ci);
                continue;
            }
            let mut docs = BTreeSet::new();
            for term in clause {
                for loc in self.positions(term, usize::MAX, 0)?.locations {
                    let d = self.parts()[loc.part].docs.locate(loc.offset).expect("occurrence inside a document");
                    docs.insert((loc.part, d));
                }
            }
            materialized = Some(match materialized {
                None => docs,
                Some(prev) => prev.intersection(&docs).copied().collect(),
            });
        }
        let Some(candidates) = materialized else {
            return Err(Error::ClauseTooFrequent { clause: deferred[0], ceiling });
        };

        let mut matching: Vec<(DocKey, Vec<Token>)> = Vec::new();
        for key in candidates {
            let doc = self.document(key.0, key.1)?;
            let toks = self.document_tokens(&doc);
            let keep = deferred
                .iter()
                .all(|&ci| q.clauses[ci].iter().any(|t| !find_all(&toks, t).is_empty()));
            if keep {
                matching.push((key, toks));
            }
        }

        let total = matching.len() as u64;
        let chosen: Vec<usize> = if matching.len() <= opts.maxnum {
            (0..matching.len()).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut v = index::sample(&mut rng, matching.len(), opts.maxnum).into_vec();
            v.sort_unstable();
            v
        };
        let mut documents = Vec::with_capacity(chosen.len());
        for i in chosen {
            let ((part, d), toks) = &matching[i];
            let mut doc = self.document(*part, *d)?;
            for (ci, clause) in q.clauses.iter().enumerate() {
                for (ti, term) in clause.iter().enumerate() {
                    let positions = find_all(toks, term);
                    if !positions.is_empty() {
                        doc.matches.push(TermMatch { clause: ci, term: ti, positions });
                    }
                }
            }
            documents.push(doc);
        }
        Ok(DocSearch { total, documents })
    }

    /// Count of each term per clause, for reporting.
    pub fn term_counts(&self, q: &CnfQuery) -> Result<BTreeMap<(usize, usize), u64>> {
        let mut out = BTreeMap::new();
        for (ci, clause) in q.clauses.iter().enumerate() {
            for (ti, term) in clause.iter().enumerate() {
                out.insert((ci, ti), self.count(term)?);
            }
        }
        Ok(out)
    }
}
