//! Search-engine occurrence source.
//!
//! Counts come from a web search API (engine agnostic: endpoint, auth header
//! and JSON pointers into the response are configuration), from an
//! append-only fixture cache, or both. Replay mode never touches the network.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};
use std::thread;
use std::time::{Duration, Instant};

use cqe_core::source::{OccurrenceSource, SourceError};
use cqe_core::text::normalize_term;
use serde::{Deserialize, Serialize};

use crate::now_millis;

pub const HITS_FILE: &str = "hits.jsonl";
pub const SUGGESTIONS_FILE: &str = "suggestions.jsonl";
pub const API_KEY_ENV: &str = "ENGINE_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineMode {
    Live,
    Replay,
    LiveWithCache,
}

impl std::str::FromStr for EngineMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(EngineMode::Live),
            "replay" => Ok(EngineMode::Replay),
            "live-with-cache" => Ok(EngineMode::LiveWithCache),
            other => Err(format!("unknown engine mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub mode: EngineMode,
    /// Search endpoint; the query goes in `query_param`.
    pub endpoint: String,
    /// Suggestion endpoint; defaults to `endpoint`.
    pub suggest_endpoint: Option<String>,
    pub api_key: Option<String>,
    pub auth_header: String,
    pub query_param: String,
    /// JSON pointer to the total result count.
    pub count_path: String,
    /// JSON pointer to the suggestions array.
    pub suggestions_path: String,
    /// Field holding the text when suggestion items are objects.
    pub suggestion_field: String,
    /// Stand-in for M, the number of indexed documents.
    pub m_estimate: u64,
    /// Maximum requests per second.
    pub rate_limit: f64,
    pub timeout_ms: u64,
    /// Directory holding `hits.jsonl` and `suggestions.jsonl`.
    pub fixtures: PathBuf,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            mode: EngineMode::Replay,
            endpoint: "https://api.bing.microsoft.com/v7.0/search".into(),
            suggest_endpoint: Some("https://api.bing.microsoft.com/v7.0/suggestions".into()),
            api_key: None,
            auth_header: "Ocp-Apim-Subscription-Key".into(),
            query_param: "q".into(),
            count_path: "/webPages/totalEstimatedMatches".into(),
            suggestions_path: "/suggestionGroups/0/searchSuggestions".into(),
            suggestion_field: "query".into(),
            m_estimate: 10_000_000_000,
            rate_limit: 3.0,
            timeout_ms: 10_000,
            fixtures: PathBuf::from("fixtures"),
        }
    }
}

impl EngineConfig {
    /// Applies `ENGINE_API_KEY` when it is set.
    pub fn with_env_overrides(mut self) -> Self {
        if let Ok(key) = std::env::var(API_KEY_ENV) {
            if !key.is_empty() {
                self.api_key = Some(key);
            }
        }
        self
    }
}

/// A recorded hit count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitFixture {
    pub key: String,
    pub count: u64,
    pub fetched_at: u64,
}

/// Recorded suggestions for a seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionFixture {
    pub seed: String,
    pub suggestions: Vec<String>,
    pub fetched_at: u64,
}

/// Normalized, deduplicated, sorted terms.
fn canonical_terms(terms: &[&str]) -> Vec<String> {
    let mut out: Vec<String> = terms
        .iter()
        .map(|t| normalize_term(t))
        .filter(|t| !t.is_empty())
        .collect();
    out.sort();
    out.dedup();
    out
}

/// The engine query for a term set: each term double-quoted, sorted, joined
/// with `AND`. Also the cache key.
pub fn canonical_key(terms: &[&str]) -> String {
    canonical_terms(terms)
        .iter()
        .map(|t| format!("\"{t}\""))
        .collect::<Vec<_>>()
        .join(" AND ")
}

/// Inverse of [`canonical_key`].
pub fn key_terms(key: &str) -> Vec<String> {
    key.split(" AND ")
        .map(|t| t.trim().trim_matches('"').to_string())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Removes the seed tokens from an engine suggestion.
pub fn strip_seed(suggestion: &str, seed: &str) -> String {
    let seed_tokens = cqe_core::text::tokenize(seed);
    cqe_core::text::tokenize(suggestion)
        .into_iter()
        .filter(|t| !seed_tokens.contains(t))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("{path}:{line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, FixtureError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => {
            return Err(FixtureError::Io {
                path: path.to_owned(),
                source,
            })
        }
    };
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| FixtureError::Io {
            path: path.to_owned(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| FixtureError::Parse {
            path: path.to_owned(),
            line: n + 1,
            source,
        })?);
    }
    Ok(out)
}

/// In-memory view of a fixture directory. The last entry for a key wins.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FixtureSet {
    pub hits: BTreeMap<String, u64>,
    pub suggestions: BTreeMap<String, Vec<String>>,
}

impl FixtureSet {
    pub fn load(dir: &Path) -> Result<Self, FixtureError> {
        let mut set = FixtureSet::default();
        for fx in read_jsonl::<HitFixture>(&dir.join(HITS_FILE))? {
            set.hits.insert(fx.key, fx.count);
        }
        for fx in read_jsonl::<SuggestionFixture>(&dir.join(SUGGESTIONS_FILE))? {
            set.suggestions.insert(normalize_term(&fx.seed), fx.suggestions);
        }
        set.repair_joint_counts();
        Ok(set)
    }

    /// Clamps every conjunction count to the smallest recorded count of its
    /// member terms. Live engines routinely report f(x AND y) > f(x).
    pub fn repair_joint_counts(&mut self) -> usize {
        let mut repairs = Vec::new();
        for (key, &count) in &self.hits {
            let terms = key_terms(key);
            if terms.len() < 2 {
                continue;
            }
            let bound = terms
                .iter()
                .filter_map(|t| self.hits.get(&canonical_key(&[t.as_str()])))
                .min()
                .copied();
            if let Some(bound) = bound {
                if count > bound {
                    log::warn!("fixture {key}: joint count {count} exceeds member count {bound}; clamping");
                    repairs.push((key.clone(), bound));
                }
            }
        }
        let n = repairs.len();
        for (key, bound) in repairs {
            self.hits.insert(key, bound);
        }
        n
    }
}

/// Spaces requests at least `1 / rate` seconds apart; callers block for a slot.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn per_second(rate: f64) -> Self {
        let interval = if rate > 0.0 && rate.is_finite() {
            Duration::from_secs_f64(1.0 / rate)
        } else {
            Duration::ZERO
        };
        Self {
            interval,
            next: Mutex::new(None),
        }
    }

    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next.lock().unwrap();
            let now = Instant::now();
            let slot = match *next {
                Some(t) if t > now => t,
                _ => now,
            };
            *next = Some(slot + self.interval);
            slot.saturating_duration_since(now)
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }
}

/// Engine-backed [`OccurrenceSource`] with cache and replay support.
pub struct EngineClient {
    cfg: EngineConfig,
    http: Option<reqwest::blocking::Client>,
    fixtures: RwLock<FixtureSet>,
    writer: Mutex<()>,
    limiter: RateLimiter,
    requests: AtomicU64,
}

impl std::fmt::Debug for EngineClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EngineClient")
            .field("mode", &self.cfg.mode)
            .field("endpoint", &self.cfg.endpoint)
            .field("fixtures", &self.cfg.fixtures)
            .finish()
    }
}

impl EngineClient {
    pub fn new(cfg: EngineConfig) -> Result<Self, SourceError> {
        let fixtures = FixtureSet::load(&cfg.fixtures).map_err(|e| SourceError::Config(e.to_string()))?;
        let http = match cfg.mode {
            EngineMode::Replay => None,
            _ => Some(
                reqwest::blocking::Client::builder()
                    .timeout(Duration::from_millis(cfg.timeout_ms))
                    .build()
                    .map_err(|e| SourceError::Config(format!("http client: {e}")))?,
            ),
        };
        Ok(Self {
            limiter: RateLimiter::per_second(cfg.rate_limit),
            cfg,
            http,
            fixtures: RwLock::new(fixtures),
            writer: Mutex::new(()),
            requests: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    /// Network requests issued so far.
    pub fn request_count(&self) -> u64 {
        self.requests.load(Ordering::SeqCst)
    }

    fn check_estimate(&self, key: &str, count: u64) -> Result<u64, SourceError> {
        if count > self.cfg.m_estimate {
            return Err(SourceError::Config(format!(
                "count {count} for {key} exceeds m_estimate {}",
                self.cfg.m_estimate
            )));
        }
        Ok(count)
    }

    /// Result count for the AND-conjunction of `terms`.
    pub fn fetch_count(&self, terms: &[&str]) -> Result<u64, SourceError> {
        let key = canonical_key(terms);
        if key.is_empty() {
            return Err(SourceError::Config("empty term set".into()));
        }
        if self.cfg.mode != EngineMode::Live {
            if let Some(&count) = self.fixtures.read().unwrap().hits.get(&key) {
                return self.check_estimate(&key, count);
            }
            if self.cfg.mode == EngineMode::Replay {
                return Err(SourceError::FixtureMiss(key));
            }
        }
        let body = self.get(&self.cfg.endpoint, &key)?;
        let count = parse_count(&body, &self.cfg.count_path)?;
        self.store_hit(HitFixture {
            key: key.clone(),
            count,
            fetched_at: now_millis(),
        })?;
        self.check_estimate(&key, count)
    }

    /// Up to `limit` engine completions for `seed`, with the seed tokens removed.
    pub fn fetch_suggestions(&self, seed: &str, limit: usize) -> Result<Vec<String>, SourceError> {
        let seed_norm = normalize_term(seed);
        if seed_norm.is_empty() {
            return Err(SourceError::Config("empty seed".into()));
        }
        if limit == 0 {
            return Ok(Vec::new());
        }
        let cached = if self.cfg.mode != EngineMode::Live {
            self.fixtures.read().unwrap().suggestions.get(&seed_norm).cloned()
        } else {
            None
        };
        let raw = match cached {
            Some(s) => s,
            None if self.cfg.mode == EngineMode::Replay => {
                return Err(SourceError::FixtureMiss(format!("suggestions for {seed_norm:?}")))
            }
            None => {
                let endpoint = self.cfg.suggest_endpoint.as_deref().unwrap_or(&self.cfg.endpoint);
                let body = self.get(endpoint, &seed_norm)?;
                let list = parse_suggestions(&body, &self.cfg.suggestions_path, &self.cfg.suggestion_field)?;
                self.store_suggestions(SuggestionFixture {
                    seed: seed_norm.clone(),
                    suggestions: list.clone(),
                    fetched_at: now_millis(),
                })?;
                list
            }
        };
        let mut out: Vec<String> = Vec::new();
        for s in raw {
            let term = strip_seed(&s, &seed_norm);
            if !term.is_empty() && !out.contains(&term) {
                out.push(term);
            }
            if out.len() == limit {
                break;
            }
        }
        Ok(out)
    }

    fn get(&self, endpoint: &str, query: &str) -> Result<String, SourceError> {
        let http = self
            .http
            .as_ref()
            .ok_or_else(|| SourceError::Config("no HTTP client in replay mode".into()))?;
        self.limiter.acquire();
        self.requests.fetch_add(1, Ordering::SeqCst);
        let mut req = http.get(endpoint).query(&[(self.cfg.query_param.as_str(), query)]);
        if let Some(key) = &self.cfg.api_key {
            req = req.header(self.cfg.auth_header.as_str(), key.as_str());
        }
        let resp = req.send().map_err(|e| SourceError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(SourceError::Transport(format!("{endpoint} returned {status}")));
        }
        resp.text().map_err(|e| SourceError::Transport(e.to_string()))
    }

    fn append(&self, file: &str, line: String) -> Result<(), SourceError> {
        let _guard = self.writer.lock().unwrap();
        let dir = &self.cfg.fixtures;
        fs::create_dir_all(dir).map_err(|e| SourceError::Config(format!("{}: {e}", dir.display())))?;
        let path = dir.join(file);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| SourceError::Config(format!("{}: {e}", path.display())))?;
        writeln!(f, "{line}").map_err(|e| SourceError::Config(format!("{}: {e}", path.display())))
    }

    fn store_hit(&self, fx: HitFixture) -> Result<(), SourceError> {
        self.append(HITS_FILE, serde_json::to_string(&fx).expect("serializable"))?;
        self.fixtures.write().unwrap().hits.insert(fx.key, fx.count);
        Ok(())
    }

    fn store_suggestions(&self, fx: SuggestionFixture) -> Result<(), SourceError> {
        self.append(SUGGESTIONS_FILE, serde_json::to_string(&fx).expect("serializable"))?;
        self.fixtures
            .write()
            .unwrap()
            .suggestions
            .insert(fx.seed, fx.suggestions);
        Ok(())
    }
}

fn parse_json(body: &str) -> Result<serde_json::Value, SourceError> {
    serde_json::from_str(body).map_err(|e| SourceError::Transport(format!("malformed engine response: {e}")))
}

/// Reads the count at `pointer`; numbers and numeric strings are accepted.
pub fn parse_count(body: &str, pointer: &str) -> Result<u64, SourceError> {
    let value = parse_json(body)?;
    let node = value
        .pointer(pointer)
        .ok_or_else(|| SourceError::Transport(format!("engine response has no {pointer}")))?;
    match node {
        serde_json::Value::Number(n) => n
            .as_u64()
            .or_else(|| n.as_f64().filter(|f| *f >= 0.0).map(|f| f as u64)),
        serde_json::Value::String(s) => s.replace(',', "").trim().parse().ok(),
        _ => None,
    }
    .ok_or_else(|| SourceError::Transport(format!("engine count at {pointer} is not a count: {node}")))
}

/// Reads the suggestion array at `pointer`; items are strings or objects with `field`.
pub fn parse_suggestions(body: &str, pointer: &str, field: &str) -> Result<Vec<String>, SourceError> {
    let value = parse_json(body)?;
    let list = match value.pointer(pointer) {
        Some(serde_json::Value::Array(items)) => items,
        // An engine with nothing to suggest may omit the array entirely.
        None => return Ok(Vec::new()),
        Some(other) => return Err(SourceError::Transport(format!("suggestions at {pointer} are not an array: {other}"))),
    };
    Ok(list
        .iter()
        .filter_map(|item| match item {
            serde_json::Value::String(s) => Some(s.clone()),
            serde_json::Value::Object(o) => o.get(field).and_then(|v| v.as_str()).map(str::to_string),
            _ => None,
        })
        .collect())
}

impl OccurrenceSource for EngineClient {
    fn count(&self, terms: &[&str]) -> Result<u64, SourceError> {
        self.fetch_count(terms)
    }

    fn total(&self) -> Result<u64, SourceError> {
        Ok(self.cfg.m_estimate)
    }
}
