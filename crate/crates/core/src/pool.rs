//! Query pool: normalized query matching, candidate assembly from several
//! sources, co-occurrence expansion and choice recording.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, CorpusIndex};
use crate::text::{normalize_term, tokenize};

/// Default conditional-probability threshold for co-occurrence expansion.
pub const DEFAULT_H_PRIME: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PoolError {
    #[error("empty query")]
    EmptyQuery,
    #[error("query not in pool: {0:?}")]
    UnknownQuery(String),
    #[error("empty term")]
    EmptyTerm,
    #[error("candidate pool is empty: {}", format_causes(.0))]
    PoolEmpty(Vec<(CandidateSource, String)>),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

fn format_causes(causes: &[(CandidateSource, String)]) -> String {
    if causes.is_empty() {
        return "no sources configured".into();
    }
    causes
        .iter()
        .map(|(s, c)| alloc::format!("{s}: {c}"))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Milliseconds since the Unix epoch. Supplied by the caller.
pub type Timestamp = u64;

/// A normalized query.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QueryKey {
    tokens: Vec<String>,
    canonical: String,
}

impl QueryKey {
    /// Lowercases and tokenizes `raw`, keeping token order.
    pub fn normalize(raw: &str) -> Result<Self, PoolError> {
        let tokens = tokenize(raw);
        if tokens.is_empty() {
            return Err(PoolError::EmptyQuery);
        }
        let canonical = tokens.join(" ");
        Ok(Self { tokens, canonical })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn canonical(&self) -> &str {
        &self.canonical
    }

    fn token_set(&self) -> BTreeSet<&str> {
        self.tokens.iter().map(String::as_str).collect()
    }

    /// Token-set Jaccard similarity.
    pub fn jaccard(&self, other: &QueryKey) -> f64 {
        let a = self.token_set();
        let b = other.token_set();
        let inter = a.intersection(&b).count();
        let union = a.union(&b).count();
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }
}

impl fmt::Display for QueryKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical)
    }
}

/// Stored query with the number of times each expansion term was chosen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPoolEntry {
    pub key: QueryKey,
    pub choices: BTreeMap<String, u64>,
    pub created_at: Timestamp,
    pub updated_at: Timestamp,
}

impl QueryPoolEntry {
    pub fn new(key: QueryKey, now: Timestamp) -> Self {
        Self {
            key,
            choices: BTreeMap::new(),
            created_at: now,
            updated_at: now,
        }
    }

    /// Terms chosen at least once, most chosen first, ties by term.
    pub fn learned_terms(&self) -> Vec<&str> {
        let mut terms: Vec<(&str, u64)> = self
            .choices
            .iter()
            .filter(|(_, &c)| c >= 1)
            .map(|(t, &c)| (t.as_str(), c))
            .collect();
        terms.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        terms.into_iter().map(|(t, _)| t).collect()
    }
}

/// Where an expansion candidate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    LexicalGraph,
    EngineSuggestion,
    Cooccurrence,
    PoolLearned,
}

impl CandidateSource {
    pub const ALL: [CandidateSource; 4] = [
        CandidateSource::PoolLearned,
        CandidateSource::LexicalGraph,
        CandidateSource::Cooccurrence,
        CandidateSource::EngineSuggestion,
    ];

    /// Dedup precedence; lower wins.
    pub fn precedence(&self) -> u8 {
        match self {
            CandidateSource::PoolLearned => 0,
            CandidateSource::LexicalGraph => 1,
            CandidateSource::Cooccurrence => 2,
            CandidateSource::EngineSuggestion => 3,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CandidateSource::LexicalGraph => "lexical_graph",
            CandidateSource::EngineSuggestion => "engine_suggestion",
            CandidateSource::Cooccurrence => "cooccurrence",
            CandidateSource::PoolLearned => "pool_learned",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        CandidateSource::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for CandidateSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An expansion candidate and its winning source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub term: String,
    pub source: CandidateSource,
}

/// What one source produced for a candidate-pool build.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceBatch {
    pub source: CandidateSource,
    pub outcome: Result<Vec<String>, String>,
}

impl SourceBatch {
    pub fn ok(source: CandidateSource, terms: Vec<String>) -> Self {
        Self { source, outcome: Ok(terms) }
    }

    pub fn failed(source: CandidateSource, cause: impl Into<String>) -> Self {
        Self {
            source,
            outcome: Err(cause.into()),
        }
    }
}

/// Merges source batches into one deduplicated candidate list.
///
/// Terms are normalized; seed tokens and seed-equal terms are dropped. When a
/// term comes from several sources the one with the best precedence wins. The
/// result is ordered by precedence, then by first appearance, and truncated to
/// `max_candidates`. Failed batches are logged; if no batch yields a term the
/// result is [`PoolError::PoolEmpty`] carrying every failure.
pub fn merge_candidates(seed: &QueryKey, batches: &[SourceBatch], max_candidates: usize) -> Result<Vec<Candidate>, PoolError> {
    let seed_tokens = seed.token_set();
    let mut best: BTreeMap<String, (u8, usize, CandidateSource)> = BTreeMap::new();
    let mut failures = Vec::new();
    let mut order = 0usize;
    for batch in batches {
        let terms = match &batch.outcome {
            Ok(terms) => terms,
            Err(cause) => {
                log::warn!("candidate source {} failed: {}", batch.source, cause);
                failures.push((batch.source, cause.clone()));
                continue;
            }
        };
        for raw in terms {
            let term = normalize_term(raw);
            if term.is_empty() || term == seed.canonical || seed_tokens.contains(term.as_str()) {
                continue;
            }
            let rank = batch.source.precedence();
            order += 1;
            match best.get_mut(&term) {
                Some(slot) if slot.0 <= rank => {}
                Some(slot) => *slot = (rank, order, batch.source),
                None => {
                    best.insert(term, (rank, order, batch.source));
                }
            }
        }
    }
    if best.is_empty() {
        return Err(PoolError::PoolEmpty(failures));
    }
    let mut merged: Vec<(String, (u8, usize, CandidateSource))> = best.into_iter().collect();
    merged.sort_by_key(|(_, (rank, order, _))| (*rank, *order));
    merged.truncate(max_candidates);
    Ok(merged
        .into_iter()
        .map(|(term, (_, _, source))| Candidate { term, source })
        .collect())
}

/// Co-occurrence expansion: every vocabulary term `v` outside the seeds that
/// co-occurs with them and has `P(v | seeds) >= h_prime`, paired with that
/// probability. Output follows vocabulary order.
pub fn expand_cooccurrence<'a, I>(index: &CorpusIndex, seeds: &[&str], vocabulary: I, h_prime: f64) -> Result<Vec<(String, f64)>, PoolError>
where
    I: IntoIterator<Item = &'a str>,
{
    let seed_norms: BTreeSet<String> = seeds.iter().map(|s| normalize_term(s)).collect();
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    // Surface zero support even for an empty vocabulary.
    index.cond_prob(seeds.first().copied().unwrap_or(""), seeds)?;
    for v in vocabulary {
        let term = normalize_term(v);
        if term.is_empty() || seed_norms.contains(&term) || !seen.insert(term.clone()) {
            continue;
        }
        let p = index.cond_prob(&term, seeds)?;
        if p > 0.0 && p >= h_prime {
            out.push((term, p));
        }
    }
    Ok(out)
}

/// All stored queries, keyed by canonical form.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryPool {
    entries: BTreeMap<String, QueryPoolEntry>,
}

/// Result of matching a query against the pool.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryMatch {
    pub entry: QueryPoolEntry,
    pub exact: bool,
    /// Similarity of the returned entry to the submitted query.
    pub similarity: f64,
}

impl QueryPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries<I: IntoIterator<Item = QueryPoolEntry>>(entries: I) -> Self {
        Self {
            entries: entries
                .into_iter()
                .map(|e| (e.key.canonical().to_string(), e))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &QueryKey) -> Option<&QueryPoolEntry> {
        self.entries.get(key.canonical())
    }

    /// Entries in canonical order.
    pub fn entries(&self) -> impl Iterator<Item = &QueryPoolEntry> {
        self.entries.values()
    }

    /// Exact hit, or else record `key` as a new entry and return the most
    /// similar existing one (token-set Jaccard, ties by canonical order). If
    /// nothing overlaps, the fresh entry itself is returned.
    pub fn match_query(&mut self, key: &QueryKey, now: Timestamp) -> QueryMatch {
        if let Some(entry) = self.entries.get(key.canonical()) {
            return QueryMatch {
                entry: entry.clone(),
                exact: true,
                similarity: 1.0,
            };
        }
        let mut nearest: Option<(&QueryPoolEntry, f64)> = None;
        for entry in self.entries.values() {
            let sim = key.jaccard(&entry.key);
            if sim > 0.0 && nearest.is_none_or(|(_, best)| sim > best) {
                nearest = Some((entry, sim));
            }
        }
        let result = match nearest {
            Some((entry, similarity)) => QueryMatch {
                entry: entry.clone(),
                exact: false,
                similarity,
            },
            None => QueryMatch {
                entry: QueryPoolEntry::new(key.clone(), now),
                exact: false,
                similarity: 0.0,
            },
        };
        self.entries
            .insert(key.canonical().to_string(), QueryPoolEntry::new(key.clone(), now));
        result
    }

    /// Adds one to the choice count of `chosen` under `key`.
    pub fn record_choice(&mut self, key: &QueryKey, chosen: &str, now: Timestamp) -> Result<&QueryPoolEntry, PoolError> {
        let term = normalize_term(chosen);
        if term.is_empty() {
            return Err(PoolError::EmptyTerm);
        }
        let entry = self
            .entries
            .get_mut(key.canonical())
            .ok_or_else(|| PoolError::UnknownQuery(key.canonical().to_string()))?;
        *entry.choices.entry(term).or_insert(0) += 1;
        entry.updated_at = entry.updated_at.max(now);
        Ok(entry)
    }
}
