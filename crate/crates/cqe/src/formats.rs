//! File formats: corpus input, persisted indexes, graph files, voter rankings
//! and system rankings.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cqe_core::corpus::{CorpusIndex, DocRecord};
use cqe_core::eval::VoterRanking;
use cqe_core::lexical::LexicalGraph;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

/// How a corpus is laid out on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    /// A directory of plain-text files; the id is the relative path.
    Dir,
    /// One `id<TAB>text` record per line.
    Records,
    /// An index previously written by `cqe index`.
    Index,
}

impl CorpusFormat {
    /// Directories are `dir`, `*.json` files are indexes, anything else is records.
    pub fn detect(path: &Path) -> Self {
        if path.is_dir() {
            CorpusFormat::Dir
        } else if path.extension().is_some_and(|e| e == "json") {
            CorpusFormat::Index
        } else {
            CorpusFormat::Records
        }
    }
}

pub fn read_dir_corpus(root: &Path) -> Result<Vec<DocRecord>> {
    let mut docs = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.with_context(|| format!("walking {}", root.display()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(root).expect("walkdir stays under root");
        let id = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        let text = fs::read_to_string(entry.path()).with_context(|| format!("reading {}", entry.path().display()))?;
        docs.push(DocRecord::new(id, text));
    }
    Ok(docs)
}

pub fn read_records_corpus(path: &Path) -> Result<Vec<DocRecord>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut docs = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let Some((id, text)) = line.split_once('\t') else {
            bail!("{}:{}: expected `id<TAB>text`", path.display(), n + 1);
        };
        docs.push(DocRecord::new(id, text));
    }
    Ok(docs)
}

/// Builds (or loads) the index for a corpus path.
pub fn load_corpus(path: &Path, format: Option<CorpusFormat>) -> Result<CorpusIndex> {
    let format = format.unwrap_or_else(|| CorpusFormat::detect(path));
    let docs = match format {
        CorpusFormat::Index => return load_index(path),
        CorpusFormat::Dir => read_dir_corpus(path)?,
        CorpusFormat::Records => read_records_corpus(path)?,
    };
    CorpusIndex::build(docs).with_context(|| format!("indexing {}", path.display()))
}

pub fn save_index(index: &CorpusIndex, path: &Path) -> Result<()> {
    let json = serde_json::to_string(index)?;
    write_atomic(path, json.as_bytes())
}

pub fn load_index(path: &Path) -> Result<CorpusIndex> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing index {}", path.display()))
}

pub fn load_graph(path: &Path) -> Result<LexicalGraph> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    LexicalGraph::parse(&text).with_context(|| format!("loading graph {}", path.display()))
}

/// One `{voter_id, order}` object per line.
pub fn load_votes(path: &Path) -> Result<Vec<VoterRanking>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), n + 1)))
        .collect()
}

/// A system ranking: one term per line, named after the file stem.
pub fn load_system(path: &Path) -> Result<(String, Vec<String>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let order = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect();
    Ok((name, order))
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("replacing {}", path.display()))?;
    Ok(())
}
