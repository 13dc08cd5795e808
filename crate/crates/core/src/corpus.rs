//! Document-level inverted index over a local corpus.
//!
//! A term counts once per document. Multi-word terms are matched as the
//! AND-conjunction of their tokens.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::source::{OccurrenceSource, SourceError};
use crate::text::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocRecord {
    pub id: String,
    pub text: String,
}

impl DocRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("empty document id")]
    EmptyId,
    #[error("zero-support condition: no document contains all conditioning terms")]
    ZeroSupport,
}

/// Postings are kept as sorted document ordinals into `ids`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusIndex {
    ids: Vec<String>,
    postings: BTreeMap<String, Vec<u32>>,
}

impl CorpusIndex {
    pub fn build<I>(docs: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = DocRecord>,
    {
        let mut ids = Vec::new();
        let mut seen = BTreeSet::new();
        let mut postings: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        for doc in docs {
            if doc.id.is_empty() {
                return Err(CorpusError::EmptyId);
            }
            if !seen.insert(doc.id.clone()) {
                return Err(CorpusError::DuplicateId(doc.id));
            }
            let ordinal = ids.len() as u32;
            ids.push(doc.id);
            for token in tokenize(&doc.text) {
                let list = postings.entry(token).or_default();
                // Ordinals are pushed in increasing order, so only the tail can repeat.
                if list.last() != Some(&ordinal) {
                    list.push(ordinal);
                }
            }
        }
        Ok(Self { ids, postings })
    }

    /// Total number of documents (M).
    pub fn num_docs(&self) -> u64 {
        self.ids.len() as u64
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.ids
    }

    /// Normalized vocabulary, in sorted order.
    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    /// Ids of the documents containing `term` (one token), or an empty iterator.
    pub fn postings(&self, term: &str) -> impl Iterator<Item = &str> {
        let key = crate::text::normalize_term(term);
        self.postings
            .get(&key)
            .into_iter()
            .flatten()
            .map(move |&i| self.ids[i as usize].as_str())
    }

    /// Document ordinals matching every token of every term.
    fn matching(&self, terms: &[&str]) -> Vec<u32> {
        let mut tokens: Vec<String> = Vec::new();
        for term in terms {
            let toks = tokenize(term);
            if toks.is_empty() {
                return Vec::new();
            }
            tokens.extend(toks);
        }
        if tokens.is_empty() {
            return Vec::new();
        }
        let mut lists = Vec::with_capacity(tokens.len());
        for token in &tokens {
            match self.postings.get(token) {
                Some(list) => lists.push(list.as_slice()),
                None => return Vec::new(),
            }
        }
        lists.sort_by_key(|l| l.len());
        let mut acc = lists[0].to_vec();
        for list in &lists[1..] {
            acc = intersect(&acc, list);
            if acc.is_empty() {
                break;
            }
        }
        acc
    }

    /// Number of documents matching the conjunction of `terms`.
    pub fn conjunction_freq(&self, terms: &[&str]) -> u64 {
        self.matching(terms).len() as u64
    }

    /// f(x): documents containing `term`; 0 for unknown terms.
    pub fn doc_freq(&self, term: &str) -> u64 {
        self.conjunction_freq(&[term])
    }

    /// f(x, y): documents containing both terms.
    pub fn pair_doc_freq(&self, x: &str, y: &str) -> u64 {
        self.conjunction_freq(&[x, y])
    }

    /// `P(target | given)`: the share of documents holding all of `given`
    /// that also hold `target`.
    pub fn cond_prob(&self, target: &str, given: &[&str]) -> Result<f64, CorpusError> {
        let support = self.matching(given);
        if support.is_empty() {
            return Err(CorpusError::ZeroSupport);
        }
        let hits = intersect(&support, &self.matching(&[target]));
        Ok(hits.len() as f64 / support.len() as f64)
    }
}

fn intersect(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

impl OccurrenceSource for CorpusIndex {
    fn count(&self, terms: &[&str]) -> Result<u64, SourceError> {
        Ok(self.conjunction_freq(terms))
    }

    fn total(&self) -> Result<u64, SourceError> {
        Ok(self.num_docs())
    }
}
