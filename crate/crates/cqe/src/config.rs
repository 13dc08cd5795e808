//! Service configuration, read from a TOML file.
//!
//! ```toml
//! listen = "127.0.0.1:8080"
//! graph = "graph.txt"
//! pool = "pool.jsonl"
//! corpus = "docs/"          # optional
//! counts = "engine"         # or "corpus"
//!
//! [defaults]
//! rho = 0.3
//! h_prime = 0.3
//!
//! [engine]
//! mode = "replay"
//! fixtures = "fixtures"
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cqe_core::lexical::{Direction, ExpansionPolicy, Relation};
use serde::{Deserialize, Serialize};

use crate::engine::EngineConfig;
use crate::formats::CorpusFormat;

/// Which backend answers hit-count queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountSource {
    Engine,
    Corpus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Defaults {
    pub rho: f64,
    pub epsilon: f64,
    pub h_prime: f64,
    pub r_threshold: f64,
    pub max_candidates: usize,
    pub max_depth: u32,
    pub direction: Direction,
    pub suggestion_limit: usize,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            rho: cqe_core::measures::DEFAULT_RHO,
            epsilon: cqe_core::measures::DEFAULT_EPSILON,
            h_prime: cqe_core::pool::DEFAULT_H_PRIME,
            r_threshold: 0.5,
            max_candidates: 30,
            max_depth: 2,
            direction: Direction::Down,
            suggestion_limit: 10,
        }
    }
}

impl Defaults {
    pub fn policy(&self) -> ExpansionPolicy {
        ExpansionPolicy {
            max_depth: self.max_depth,
            direction: self.direction,
            precision_target: self.r_threshold,
            r_threshold: self.r_threshold,
            relations: vec![Relation::IsA, Relation::PartOf],
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("rho", self.rho), ("h_prime", self.h_prime), ("r_threshold", self.r_threshold)] {
            if !(0.0..=1.0).contains(&v) {
                bail!("defaults.{name} must lie in [0, 1], got {v}");
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            bail!("defaults.epsilon must be positive, got {}", self.epsilon);
        }
        if self.max_candidates == 0 {
            bail!("defaults.max_candidates must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub listen: String,
    pub graph: Option<PathBuf>,
    /// Without a pool file the pool lives in memory.
    pub pool: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub corpus_format: Option<CorpusFormat>,
    /// Defaults to the engine when one is configured.
    pub counts: Option<CountSource>,
    pub engine: Option<EngineConfig>,
    pub defaults: Defaults,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            graph: None,
            pool: None,
            corpus: None,
            corpus_format: None,
            counts: None,
            engine: None,
            defaults: Defaults::default(),
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: AppConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.graph, &mut cfg.pool, &mut cfg.corpus].into_iter().flatten() {
            resolve(base, p);
        }
        if let Some(engine) = &mut cfg.engine {
            resolve(base, &mut engine.fixtures);
        }
        Ok(cfg.with_env_overrides())
    }

    pub fn with_env_overrides(mut self) -> Self {
        self.engine = self.engine.map(EngineConfig::with_env_overrides);
        self
    }

    /// The configured count backend, after checking it exists.
    pub fn count_source(&self) -> Result<CountSource> {
        let chosen = match self.counts {
            Some(c) => c,
            None if self.engine.is_some() => CountSource::Engine,
            None if self.corpus.is_some() => CountSource::Corpus,
            None => bail!("no occurrence source configured: set `corpus` or an `[engine]` section"),
        };
        match chosen {
            CountSource::Engine if self.engine.is_none() => bail!("counts = \"engine\" needs an [engine] section"),
            CountSource::Corpus if self.corpus.is_none() => bail!("counts = \"corpus\" needs a corpus path"),
            _ => Ok(chosen),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.count_source()?;
        self.defaults.validate()
    }
}
