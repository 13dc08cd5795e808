//! Query-pool persistence.
//!
//! One JSON object per line, sorted by canonical query:
//! `{"canonical":..,"choices":{..},"created_at":..,"updated_at":..}`.
//! Every mutation rewrites the whole file through a temporary file and a
//! rename, so readers never see a partial pool.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};

use anyhow::{bail, Context, Result};
use cqe_core::pool::{QueryKey, QueryPool, QueryPoolEntry, Timestamp};
use serde::{Deserialize, Serialize};

use crate::formats::write_atomic;

/// The persisted form of a pool entry; also the API's entry snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolRecord {
    pub canonical: String,
    pub choices: BTreeMap<String, u64>,
    pub created_at: Timestamp,
    pub updated_at: Timestamp,
}

impl From<&QueryPoolEntry> for PoolRecord {
    fn from(e: &QueryPoolEntry) -> Self {
        Self {
            canonical: e.key.canonical().to_string(),
            choices: e.choices.clone(),
            created_at: e.created_at,
            updated_at: e.updated_at,
        }
    }
}

impl PoolRecord {
    pub fn into_entry(self) -> Result<QueryPoolEntry> {
        let key = QueryKey::normalize(&self.canonical).with_context(|| format!("pool entry {:?}", self.canonical))?;
        if key.canonical() != self.canonical {
            bail!("pool entry {:?} is not in canonical form (expected {:?})", self.canonical, key.canonical());
        }
        Ok(QueryPoolEntry {
            key,
            choices: self.choices,
            created_at: self.created_at,
            updated_at: self.updated_at,
        })
    }
}

pub fn encode_pool(pool: &QueryPool) -> String {
    let mut out = String::new();
    for entry in pool.entries() {
        out.push_str(&serde_json::to_string(&PoolRecord::from(entry)).expect("serializable"));
        out.push('\n');
    }
    out
}

pub fn decode_pool(text: &str) -> Result<QueryPool> {
    let mut entries: Vec<QueryPoolEntry> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: PoolRecord = serde_json::from_str(line).with_context(|| format!("pool line {}", n + 1))?;
        if !seen.insert(record.canonical.clone()) {
            bail!("pool line {}: duplicate entry {:?}", n + 1, record.canonical);
        }
        entries.push(record.into_entry().with_context(|| format!("pool line {}", n + 1))?);
    }
    Ok(QueryPool::from_entries(entries))
}

pub fn load_pool(path: &Path) -> Result<QueryPool> {
    match fs::read_to_string(path) {
        Ok(text) => decode_pool(&text).with_context(|| format!("loading pool {}", path.display())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(QueryPool::new()),
        Err(e) => Err(e).with_context(|| format!("reading pool {}", path.display())),
    }
}

pub fn save_pool(pool: &QueryPool, path: &Path) -> Result<()> {
    write_atomic(path, encode_pool(pool).as_bytes()).with_context(|| format!("saving pool {}", path.display()))
}

/// A pool shared by request handlers. Without a path it lives in memory only.
#[derive(Debug)]
pub struct PoolStore {
    path: Option<PathBuf>,
    pool: Mutex<QueryPool>,
}

impl PoolStore {
    pub fn open(path: Option<PathBuf>) -> Result<Self> {
        let pool = match &path {
            Some(p) => load_pool(p)?,
            None => QueryPool::new(),
        };
        Ok(Self {
            path,
            pool: Mutex::new(pool),
        })
    }

    pub fn in_memory(pool: QueryPool) -> Self {
        Self {
            path: None,
            pool: Mutex::new(pool),
        }
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Locks the pool. Mutations must be followed by [`PoolStore::persist`]
    /// while the guard is still held.
    pub fn lock(&self) -> MutexGuard<'_, QueryPool> {
        self.pool.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    pub fn persist(&self, pool: &QueryPool) -> Result<()> {
        match &self.path {
            Some(p) => save_pool(pool, p),
            None => Ok(()),
        }
    }

    pub fn snapshot(&self) -> Vec<PoolRecord> {
        self.lock().entries().map(PoolRecord::from).collect()
    }
}
