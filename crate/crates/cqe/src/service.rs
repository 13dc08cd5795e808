//! The expansion pipeline behind both the HTTP API and the CLI:
//! normalize, match against the pool, gather candidates, rank.

use std::fmt::Write as _;
use std::sync::Arc;

use anyhow::{Context, Result};
use cqe_core::corpus::CorpusIndex;
use cqe_core::lexical::LexicalGraph;
use cqe_core::pool::{self, Candidate, CandidateSource, PoolError, QueryKey, SourceBatch, Timestamp};
use cqe_core::rank::{self, Components, RankError};
use cqe_core::source::OccurrenceSource;
use serde::{Deserialize, Serialize};

use crate::config::{AppConfig, CountSource, Defaults};
use crate::engine::{strip_seed, EngineClient};
use crate::formats;
use crate::store::{PoolRecord, PoolStore};

pub type Clock = Arc<dyn Fn() -> Timestamp + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpandRequest {
    pub query: String,
    /// Restrict candidates to these sources.
    #[serde(default)]
    pub source_filter: Option<Vec<CandidateSource>>,
    #[serde(default)]
    pub limit: Option<usize>,
}

impl ExpandRequest {
    pub fn new(query: impl Into<String>) -> Self {
        Self {
            query: query.into(),
            source_filter: None,
            limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChooseRequest {
    pub query: String,
    pub term: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpandedCandidate {
    pub term: String,
    pub distance: f64,
    pub source: CandidateSource,
    pub components: Components,
    /// The matched query followed by the term, ready to hand to a search engine.
    pub expanded_query: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpandResponse {
    /// The submitted query, normalized.
    pub query: String,
    pub matched_query: String,
    pub exact: bool,
    pub similarity: f64,
    pub candidates: Vec<ExpandedCandidate>,
    /// Candidates left out because their counts were unavailable.
    pub dropped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub counts: CountSource,
    pub pool_entries: usize,
    pub graph_synsets: usize,
    pub corpus_docs: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("invalid request: {0}")]
    BadRequest(String),
    #[error("no expansion candidates for {query:?}")]
    PoolEmpty { query: String, causes: Vec<String> },
    #[error("occurrence source unavailable: {0}")]
    Upstream(String),
    #[error("internal error: {0:#}")]
    Internal(anyhow::Error),
}

impl ServiceError {
    pub fn status(&self) -> u16 {
        match self {
            ServiceError::BadRequest(_) => 400,
            ServiceError::PoolEmpty { .. } => 404,
            ServiceError::Upstream(_) => 502,
            ServiceError::Internal(_) => 500,
        }
    }

    pub fn causes(&self) -> Vec<String> {
        match self {
            ServiceError::PoolEmpty { causes, .. } => causes.clone(),
            _ => Vec::new(),
        }
    }
}

fn normalize(query: &str) -> Result<QueryKey, ServiceError> {
    QueryKey::normalize(query).map_err(|_| ServiceError::BadRequest("empty query: no alphanumeric characters".into()))
}

pub struct Service {
    defaults: Defaults,
    graph: Option<LexicalGraph>,
    index: Option<CorpusIndex>,
    engine: Option<EngineClient>,
    counts: CountSource,
    store: PoolStore,
    clock: Clock,
}

impl std::fmt::Debug for Service {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Service")
            .field("counts", &self.counts)
            .field("engine", &self.engine)
            .field("pool", &self.store.path())
            .finish()
    }
}

impl Service {
    /// Loads every configured resource. Must not run inside an async runtime:
    /// the engine client is blocking.
    pub fn build(cfg: &AppConfig) -> Result<Self> {
        cfg.validate()?;
        let graph = cfg.graph.as_deref().map(formats::load_graph).transpose()?;
        let index = cfg
            .corpus
            .as_deref()
            .map(|p| formats::load_corpus(p, cfg.corpus_format))
            .transpose()?;
        let engine = cfg
            .engine
            .clone()
            .map(EngineClient::new)
            .transpose()
            .context("starting engine client")?;
        Ok(Self {
            defaults: cfg.defaults.clone(),
            graph,
            index,
            engine,
            counts: cfg.count_source()?,
            store: PoolStore::open(cfg.pool.clone())?,
            clock: Arc::new(crate::now_millis),
        })
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn engine(&self) -> Option<&EngineClient> {
        self.engine.as_ref()
    }

    pub fn store(&self) -> &PoolStore {
        &self.store
    }

    pub fn defaults(&self) -> &Defaults {
        &self.defaults
    }

    fn occurrence(&self) -> &dyn OccurrenceSource {
        match self.counts {
            CountSource::Engine => self.engine.as_ref().expect("validated config"),
            CountSource::Corpus => self.index.as_ref().expect("validated config"),
        }
    }

    pub fn health(&self) -> Health {
        Health {
            status: "ok".into(),
            counts: self.counts,
            pool_entries: self.store.lock().len(),
            graph_synsets: self.graph.as_ref().map_or(0, |g| g.synsets().len()),
            corpus_docs: self.index.as_ref().map_or(0, |i| i.num_docs()),
        }
    }

    /// Candidates for `seed` from every configured source, learned terms first.
    pub fn candidate_pool(
        &self,
        seed: &QueryKey,
        learned: &[&str],
        filter: Option<&[CandidateSource]>,
    ) -> Result<Vec<Candidate>, PoolError> {
        let wanted = |s: CandidateSource| filter.is_none_or(|f| f.contains(&s));
        let mut batches = Vec::new();

        if wanted(CandidateSource::PoolLearned) {
            batches.push(SourceBatch::ok(
                CandidateSource::PoolLearned,
                learned.iter().map(|t| t.to_string()).collect(),
            ));
        }
        if let Some(graph) = self.graph.as_ref().filter(|_| wanted(CandidateSource::LexicalGraph)) {
            let policy = self.defaults.policy();
            let mut found = graph.expand_hierarchical(seed.canonical(), &policy);
            if found.is_empty() && seed.tokens().len() > 1 {
                for token in seed.tokens() {
                    found.extend(graph.expand_hierarchical(token, &policy));
                }
            }
            batches.push(SourceBatch::ok(
                CandidateSource::LexicalGraph,
                found.into_iter().map(|e| e.term).collect(),
            ));
        }
        if let Some(index) = self.index.as_ref().filter(|_| wanted(CandidateSource::Cooccurrence)) {
            let seeds: Vec<&str> = seed.tokens().iter().map(String::as_str).collect();
            let batch = match pool::expand_cooccurrence(index, &seeds, index.vocabulary(), self.defaults.h_prime) {
                Ok(mut found) => {
                    found.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                    SourceBatch::ok(CandidateSource::Cooccurrence, found.into_iter().map(|(t, _)| t).collect())
                }
                Err(e) => SourceBatch::failed(CandidateSource::Cooccurrence, e.to_string()),
            };
            batches.push(batch);
        }
        if let Some(engine) = self.engine.as_ref().filter(|_| wanted(CandidateSource::EngineSuggestion)) {
            batches.push(match engine.fetch_suggestions(seed.canonical(), self.defaults.suggestion_limit) {
                Ok(terms) => SourceBatch::ok(CandidateSource::EngineSuggestion, terms),
                Err(e) => SourceBatch::failed(CandidateSource::EngineSuggestion, e.to_string()),
            });
        }

        // Multi-word candidates that repeat the seed ("wedding dress") reduce to the new part.
        for batch in &mut batches {
            if let Ok(terms) = &mut batch.outcome {
                for t in terms.iter_mut() {
                    *t = strip_seed(t, seed.canonical());
                }
            }
        }
        pool::merge_candidates(seed, &batches, self.defaults.max_candidates)
    }

    pub fn expand(&self, req: &ExpandRequest) -> Result<ExpandResponse, ServiceError> {
        let key = normalize(&req.query)?;
        if req.limit == Some(0) {
            return Err(ServiceError::BadRequest("limit must be at least 1".into()));
        }
        let matched = {
            let mut pool = self.store.lock();
            let m = pool.match_query(&key, (self.clock)());
            if !m.exact {
                self.store.persist(&pool).map_err(ServiceError::Internal)?;
            }
            m
        };
        let seed = matched.entry.key.clone();
        let learned = matched.entry.learned_terms();
        let candidates = self
            .candidate_pool(&seed, &learned, req.source_filter.as_deref())
            .map_err(|e| match e {
                PoolError::PoolEmpty(failures) => ServiceError::PoolEmpty {
                    query: seed.canonical().to_string(),
                    causes: failures.into_iter().map(|(s, c)| format!("{s}: {c}")).collect(),
                },
                other => ServiceError::BadRequest(other.to_string()),
            })?;
        let ranking = rank::rank_candidates(&seed, &candidates, self.occurrence(), self.defaults.rho, self.defaults.epsilon)
            .map_err(|e| match e {
                RankError::AllDropped(dropped) => ServiceError::Upstream(
                    dropped
                        .iter()
                        .map(|(t, e)| format!("{t}: {e}"))
                        .collect::<Vec<_>>()
                        .join("; "),
                ),
                RankError::NoCandidates => ServiceError::PoolEmpty {
                    query: seed.canonical().to_string(),
                    causes: Vec::new(),
                },
            })?;

        let limit = req.limit.unwrap_or(usize::MAX);
        Ok(ExpandResponse {
            query: key.canonical().to_string(),
            matched_query: seed.canonical().to_string(),
            exact: matched.exact,
            similarity: matched.similarity,
            candidates: ranking
                .candidates
                .into_iter()
                .take(limit)
                .map(|c| ExpandedCandidate {
                    expanded_query: format!("{} {}", seed.canonical(), c.term),
                    term: c.term,
                    distance: c.distance,
                    source: c.source,
                    components: c.components,
                })
                .collect(),
            dropped: ranking.dropped.into_iter().map(|(t, _)| t).collect(),
        })
    }

    /// Records that `term` was chosen for `query`, creating the entry if
    /// needed. The pool file is rewritten before this returns.
    pub fn choose(&self, req: &ChooseRequest) -> Result<PoolRecord, ServiceError> {
        let key = normalize(&req.query)?;
        if cqe_core::text::normalize_term(&req.term).is_empty() {
            return Err(ServiceError::BadRequest("empty term".into()));
        }
        let now = (self.clock)();
        let mut pool = self.store.lock();
        if pool.get(&key).is_none() {
            pool.match_query(&key, now);
        }
        let record = PoolRecord::from(
            pool.record_choice(&key, &req.term, now)
                .map_err(|e| ServiceError::BadRequest(e.to_string()))?,
        );
        self.store.persist(&pool).map_err(ServiceError::Internal)?;
        Ok(record)
    }
}

/// Plain-text table of an expansion.
pub fn render_table(resp: &ExpandResponse) -> String {
    let mut out = String::new();
    let banner = if resp.exact {
        format!("query: {}", resp.matched_query)
    } else if resp.matched_query == resp.query {
        format!("query: {} (new)", resp.query)
    } else {
        format!("query: {} (nearest match for {:?}, similarity {:.3})", resp.matched_query, resp.query, resp.similarity)
    };
    let _ = writeln!(out, "{banner}");
    let width = resp.candidates.iter().map(|c| c.term.len()).max().unwrap_or(4).max(4);
    let _ = writeln!(out, "{:>3}  {:<width$}  {:>8}  {:<17}  {:>8}  {:>8}", "#", "term", "distance", "source", "pmi", "ngd");
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
    for (i, c) in resp.candidates.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:>3}  {:<width$}  {:>8.4}  {:<17}  {:>8}  {:>8}",
            i + 1,
            c.term,
            c.distance,
            c.source.as_str(),
            fmt(c.components.pmi),
            fmt(c.components.ngd),
        );
    }
    if !resp.dropped.is_empty() {
        let _ = writeln!(out, "dropped (no counts): {}", resp.dropped.join(", "));
    }
    out
}
