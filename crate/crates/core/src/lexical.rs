//! A WordNet-like lexical taxonomy.
//!
//! Synsets are joined by typed `is_a` / `part_of` edges. Each edge carries a
//! traversal probability `t` (how likely the child branch is given the
//! parent) and a reliability factor `r` used to prune unreliable subtrees
//! during expansion.
//!
//! The native text format is line oriented:
//!
//! ```text
//! # comment
//! S <id> <pos> <lemma,lemma,...> [gloss...]
//! E <parent-id> <child-id> <is_a|part_of> [t] [r]
//! ```
//!
//! Multi-word lemmas use `_` in place of spaces.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::normalize_term;

/// Default reliability of an `is_a` edge that does not state one.
pub const DEFAULT_R_IS_A: f64 = 0.9;
/// Default reliability of a `part_of` edge that does not state one.
pub const DEFAULT_R_PART_OF: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pos {
    Noun,
    Verb,
    Adjective,
    Adverb,
}

impl FromStr for Pos {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "n" | "noun" => Ok(Pos::Noun),
            "v" | "verb" => Ok(Pos::Verb),
            "a" | "s" | "adj" | "adjective" => Ok(Pos::Adjective),
            "r" | "adv" | "adverb" => Ok(Pos::Adverb),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    IsA,
    PartOf,
}

impl Relation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Relation::IsA => "is_a",
            Relation::PartOf => "part_of",
        }
    }

    fn default_reliability(&self) -> f64 {
        match self {
            Relation::IsA => DEFAULT_R_IS_A,
            Relation::PartOf => DEFAULT_R_PART_OF,
        }
    }
}

impl FromStr for Relation {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "is_a" => Ok(Relation::IsA),
            "part_of" => Ok(Relation::PartOf),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Synset {
    pub id: String,
    /// Normalized lemmas (lowercase, single-spaced).
    pub lemmas: Vec<String>,
    pub pos: Pos,
    pub gloss: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexEdge {
    pub parent: String,
    pub child: String,
    pub relation: Relation,
    /// Traversal probability of the child branch given the parent.
    pub t: f64,
    /// Reliability of the subtree rooted at `child`.
    pub r: f64,
}

/// An edge as written in a graph file; `t` and `r` may be left to defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    pub parent: String,
    pub child: String,
    pub relation: Relation,
    pub t: Option<f64>,
    pub r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cycle through edge {parent} -> {child}")]
    Cycle { parent: String, child: String },
    #[error("edge {parent} -> {child} references unknown synset id {id:?}")]
    DanglingId { parent: String, child: String, id: String },
    #[error("duplicate synset id {0:?}")]
    DuplicateId(String),
    #[error("synset {0:?} has no lemmas")]
    NoLemmas(String),
    #[error("edge {parent} -> {child}: {message}")]
    InvalidEdge { parent: String, child: String, message: &'static str },
    #[error("unknown synset id {0:?}")]
    UnknownId(String),
    #[error("graph has no noun synsets")]
    NoNouns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Parent to child (specialization, parts).
    Down,
    /// Child to parent (generalization, wholes).
    Up,
    Both,
}

/// Controls hierarchical expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionPolicy {
    pub max_depth: u32,
    pub direction: Direction,
    /// Precision target π in `[0, 1]`.
    pub precision_target: f64,
    /// Subtrees entered through an edge with `r < r_threshold` are skipped.
    pub r_threshold: f64,
    pub relations: Vec<Relation>,
}

impl ExpansionPolicy {
    /// Policy whose reliability cutoff equals the precision target.
    pub fn for_precision(precision_target: f64, max_depth: u32) -> Self {
        Self {
            max_depth,
            direction: Direction::Down,
            precision_target,
            r_threshold: precision_target,
            relations: vec![Relation::IsA, Relation::PartOf],
        }
    }
}

impl Default for ExpansionPolicy {
    fn default() -> Self {
        Self::for_precision(0.5, 2)
    }
}

/// One term produced by hierarchical expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub term: String,
    pub depth: u32,
    pub path_probability: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LexicalGraph {
    synsets: Vec<Synset>,
    by_id: BTreeMap<String, usize>,
    by_lemma: BTreeMap<String, Vec<usize>>,
    edges: Vec<LexEdge>,
    // Edge indices keyed by synset index.
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
    nouns: usize,
}

impl LexicalGraph {
    /// Parses the native line format.
    pub fn parse(input: &str) -> Result<Self, GraphError> {
        let mut synsets = Vec::new();
        let mut edges = Vec::new();
        for (n, raw) in input.lines().enumerate() {
            let line = n + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let err = |message: String| GraphError::Parse { line, message };
            let mut fields = content.split_whitespace();
            match fields.next() {
                Some("S") => {
                    let id = fields.next().ok_or_else(|| err("S record missing id".into()))?;
                    let pos_field = fields.next().ok_or_else(|| err("S record missing pos".into()))?;
                    let pos = pos_field
                        .parse::<Pos>()
                        .map_err(|_| err(alloc::format!("unknown part of speech {pos_field:?}")))?;
                    let lemmas = fields.next().ok_or_else(|| err("S record missing lemmas".into()))?;
                    let gloss: Vec<&str> = fields.collect();
                    synsets.push(Synset {
                        id: id.to_string(),
                        lemmas: lemmas
                            .split(',')
                            .map(normalize_term)
                            .filter(|l| !l.is_empty())
                            .collect(),
                        pos,
                        gloss: if gloss.is_empty() { None } else { Some(gloss.join(" ")) },
                    });
                }
                Some("E") => {
                    let parent = fields.next().ok_or_else(|| err("E record missing parent".into()))?;
                    let child = fields.next().ok_or_else(|| err("E record missing child".into()))?;
                    let rel = fields.next().ok_or_else(|| err("E record missing relation".into()))?;
                    let relation = rel
                        .parse::<Relation>()
                        .map_err(|_| err(alloc::format!("unknown relation {rel:?}")))?;
                    let mut number = |name: &str| -> Result<Option<f64>, GraphError> {
                        match fields.next() {
                            None => Ok(None),
                            Some(v) => v
                                .parse::<f64>()
                                .map(Some)
                                .map_err(|_| err(alloc::format!("invalid {name} value {v:?}"))),
                        }
                    };
                    let t = number("t")?;
                    let r = number("r")?;
                    if fields.next().is_some() {
                        return Err(err("trailing fields after E record".into()));
                    }
                    edges.push(EdgeSpec {
                        parent: parent.to_string(),
                        child: child.to_string(),
                        relation,
                        t,
                        r,
                    });
                }
                Some(other) => return Err(err(alloc::format!("unknown record kind {other:?}"))),
                None => unreachable!(),
            }
        }
        Self::from_parts(synsets, edges)
    }

    /// Assembles a graph, filling in default `t` / `r` and rejecting dangling
    /// ids and cycles.
    pub fn from_parts(synsets: Vec<Synset>, edges: Vec<EdgeSpec>) -> Result<Self, GraphError> {
        let mut by_id = BTreeMap::new();
        let mut by_lemma: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut nouns = 0;
        for (i, s) in synsets.iter().enumerate() {
            if by_id.insert(s.id.clone(), i).is_some() {
                return Err(GraphError::DuplicateId(s.id.clone()));
            }
            if s.lemmas.is_empty() {
                return Err(GraphError::NoLemmas(s.id.clone()));
            }
            for lemma in &s.lemmas {
                let list = by_lemma.entry(lemma.clone()).or_default();
                if !list.contains(&i) {
                    list.push(i);
                }
            }
            if s.pos == Pos::Noun {
                nouns += 1;
            }
        }

        let mut out_degree = vec![0usize; synsets.len()];
        for e in &edges {
            for id in [&e.parent, &e.child] {
                if !by_id.contains_key(id) {
                    return Err(GraphError::DanglingId {
                        parent: e.parent.clone(),
                        child: e.child.clone(),
                        id: id.clone(),
                    });
                }
            }
            if e.parent == e.child {
                return Err(GraphError::Cycle {
                    parent: e.parent.clone(),
                    child: e.child.clone(),
                });
            }
            out_degree[by_id[&e.parent]] += 1;
        }

        let mut outgoing = vec![Vec::new(); synsets.len()];
        let mut incoming = vec![Vec::new(); synsets.len()];
        let mut resolved = Vec::with_capacity(edges.len());
        for (k, e) in edges.into_iter().enumerate() {
            let p = by_id[&e.parent];
            let c = by_id[&e.child];
            let t = e.t.unwrap_or(1.0 / out_degree[p] as f64);
            let r = e.r.unwrap_or_else(|| e.relation.default_reliability());
            let invalid = |message| GraphError::InvalidEdge {
                parent: e.parent.clone(),
                child: e.child.clone(),
                message,
            };
            if !(0.0..=1.0).contains(&t) {
                return Err(invalid("traversal probability t must lie in [0, 1]"));
            }
            if !(r > 0.0 && r < 1.0) {
                return Err(invalid("reliability r must lie in (0, 1)"));
            }
            outgoing[p].push(k);
            incoming[c].push(k);
            resolved.push(LexEdge {
                parent: e.parent,
                child: e.child,
                relation: e.relation,
                t,
                r,
            });
        }

        let graph = Self {
            synsets,
            by_id,
            by_lemma,
            edges: resolved,
            outgoing,
            incoming,
            nouns,
        };
        graph.check_acyclic()?;
        Ok(graph)
    }

    fn check_acyclic(&self) -> Result<(), GraphError> {
        const WHITE: u8 = 0;
        const GREY: u8 = 1;
        const BLACK: u8 = 2;
        let mut colour = vec![WHITE; self.synsets.len()];
        for start in 0..self.synsets.len() {
            if colour[start] != WHITE {
                continue;
            }
            // (node, next outgoing edge position)
            let mut stack = vec![(start, 0usize)];
            colour[start] = GREY;
            while let Some(&mut (node, ref mut pos)) = stack.last_mut() {
                if let Some(&edge) = self.outgoing[node].get(*pos) {
                    *pos += 1;
                    let child = self.by_id[&self.edges[edge].child];
                    match colour[child] {
                        WHITE => {
                            colour[child] = GREY;
                            stack.push((child, 0));
                        }
                        GREY => {
                            let e = &self.edges[edge];
                            return Err(GraphError::Cycle {
                                parent: e.parent.clone(),
                                child: e.child.clone(),
                            });
                        }
                        _ => {}
                    }
                } else {
                    colour[node] = BLACK;
                    stack.pop();
                }
            }
        }
        Ok(())
    }

    pub fn synsets(&self) -> &[Synset] {
        &self.synsets
    }

    pub fn edges(&self) -> &[LexEdge] {
        &self.edges
    }

    pub fn synset(&self, id: &str) -> Option<&Synset> {
        self.by_id.get(id).map(|&i| &self.synsets[i])
    }

    /// Number of noun synsets.
    pub fn noun_count(&self) -> usize {
        self.nouns
    }

    fn index_of(&self, id: &str) -> Result<usize, GraphError> {
        self.by_id
            .get(id)
            .copied()
            .ok_or_else(|| GraphError::UnknownId(id.to_string()))
    }

    /// Ids of every synset that has `word` among its lemmas, sorted.
    pub fn senses(&self, word: &str) -> Vec<&str> {
        let mut ids: Vec<&str> = self
            .by_lemma
            .get(&normalize_term(word))
            .into_iter()
            .flatten()
            .map(|&i| self.synsets[i].id.as_str())
            .collect();
        ids.sort_unstable();
        ids
    }

    /// `c` together with every synset above it through `is_a` edges.
    pub fn ancestors(&self, c: &str) -> Result<BTreeSet<&str>, GraphError> {
        let start = self.index_of(c)?;
        let mut seen = BTreeSet::new();
        let mut stack = vec![start];
        let mut out = BTreeSet::new();
        while let Some(node) = stack.pop() {
            if !seen.insert(node) {
                continue;
            }
            out.insert(self.synsets[node].id.as_str());
            for &e in &self.incoming[node] {
                let edge = &self.edges[e];
                if edge.relation == Relation::IsA {
                    stack.push(self.by_id[&edge.parent]);
                }
            }
        }
        Ok(out)
    }

    /// Concepts subsuming both `c1` and `c2`; a concept subsumes itself.
    pub fn subsumers(&self, c1: &str, c2: &str) -> Result<BTreeSet<&str>, GraphError> {
        let a = self.ancestors(c1)?;
        let b = self.ancestors(c2)?;
        Ok(a.intersection(&b).copied().collect())
    }

    /// Shared-subsumer count over the number of noun synsets.
    pub fn wordnet_distance(&self, c1: &str, c2: &str) -> Result<f64, GraphError> {
        let shared = self.subsumers(c1, c2)?.len();
        if self.nouns == 0 {
            return Err(GraphError::NoNouns);
        }
        Ok(shared as f64 / self.nouns as f64)
    }

    fn neighbours<'a>(&'a self, node: usize, policy: &'a ExpansionPolicy) -> impl Iterator<Item = (usize, &'a LexEdge)> + 'a {
        let down = matches!(policy.direction, Direction::Down | Direction::Both);
        let up = matches!(policy.direction, Direction::Up | Direction::Both);
        let downward = self.outgoing[node]
            .iter()
            .filter(move |_| down)
            .map(move |&e| (self.by_id[&self.edges[e].child], &self.edges[e]));
        let upward = self.incoming[node]
            .iter()
            .filter(move |_| up)
            .map(move |&e| (self.by_id[&self.edges[e].parent], &self.edges[e]));
        downward
            .chain(upward)
            .filter(move |(_, e)| policy.relations.contains(&e.relation))
    }

    /// Hierarchical expansion of `seed` from every one of its senses.
    ///
    /// Each term is reported once, with the minimal depth and the maximal
    /// product of `t` over any path reaching it. Lemmas of the seed's own
    /// senses are not emitted. The result is sorted by depth, then term.
    pub fn expand_hierarchical(&self, seed: &str, policy: &ExpansionPolicy) -> Vec<Expansion> {
        let seed_norm = normalize_term(seed);
        let starts: Vec<usize> = self.by_lemma.get(&seed_norm).cloned().unwrap_or_default();
        if starts.is_empty() {
            return Vec::new();
        }
        let mut excluded: BTreeSet<&str> = BTreeSet::new();
        excluded.insert(seed_norm.as_str());
        for &s in &starts {
            excluded.extend(self.synsets[s].lemmas.iter().map(String::as_str));
        }

        // Layered best-probability walk. Since t <= 1, revisiting a node can
        // never beat the simple path, so walks and paths agree on the maximum.
        let mut frontier: BTreeMap<usize, f64> = starts.iter().map(|&s| (s, 1.0)).collect();
        let mut reached: BTreeMap<usize, (u32, f64)> = BTreeMap::new();
        for depth in 1..=policy.max_depth {
            let mut next: BTreeMap<usize, f64> = BTreeMap::new();
            for (&node, &prob) in &frontier {
                for (other, edge) in self.neighbours(node, policy) {
                    if edge.r < policy.r_threshold {
                        continue;
                    }
                    let p = prob * edge.t;
                    let slot = next.entry(other).or_insert(p);
                    if p > *slot {
                        *slot = p;
                    }
                }
            }
            for (&node, &prob) in &next {
                let entry = reached.entry(node).or_insert((depth, prob));
                if prob > entry.1 {
                    entry.1 = prob;
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }

        let mut terms: BTreeMap<&str, (u32, f64)> = BTreeMap::new();
        for (node, (depth, prob)) in reached {
            if starts.contains(&node) {
                continue;
            }
            for lemma in &self.synsets[node].lemmas {
                if excluded.contains(lemma.as_str()) {
                    continue;
                }
                let entry = terms.entry(lemma.as_str()).or_insert((depth, prob));
                entry.0 = entry.0.min(depth);
                entry.1 = entry.1.max(prob);
            }
        }
        let mut out: Vec<Expansion> = terms
            .into_iter()
            .map(|(term, (depth, path_probability))| Expansion {
                term: term.to_string(),
                depth,
                path_probability,
            })
            .collect();
        out.sort_by(|a, b| a.depth.cmp(&b.depth).then_with(|| a.term.cmp(&b.term)));
        out
    }
}
