//! Ground-truth aggregation from voter rankings and rank-correlation reports.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("need at least two items to correlate, got {0}")]
    TooFewItems(usize),
    #[error("no voter rankings")]
    NoVotes,
    #[error("{context}: term sets differ (missing {missing:?}, unexpected {unexpected:?})")]
    TermMismatch {
        context: String,
        missing: Vec<String>,
        unexpected: Vec<String>,
    },
    #[error("{context}: term {term:?} appears more than once")]
    Duplicate { context: String, term: String },
}

/// One voter's ordering, most related first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoterRanking {
    pub voter_id: String,
    pub order: Vec<String>,
}

/// User expectation ranking: terms by ascending mean voter position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UERanking {
    pub order: Vec<String>,
    pub mean_ranks: BTreeMap<String, f64>,
}

fn term_set<'a>(context: &str, order: &'a [String]) -> Result<BTreeSet<&'a str>, EvalError> {
    let mut set = BTreeSet::new();
    for t in order {
        if !set.insert(t.as_str()) {
            return Err(EvalError::Duplicate {
                context: context.to_string(),
                term: t.clone(),
            });
        }
    }
    Ok(set)
}

fn same_terms(context: &str, expected: &BTreeSet<&str>, got: &BTreeSet<&str>) -> Result<(), EvalError> {
    if expected == got {
        return Ok(());
    }
    Err(EvalError::TermMismatch {
        context: context.to_string(),
        missing: expected.difference(got).map(|s| s.to_string()).collect(),
        unexpected: got.difference(expected).map(|s| s.to_string()).collect(),
    })
}

/// Averages 1-based positions across voters; ties in the mean are ordered by term.
pub fn aggregate_uer(votes: &[VoterRanking]) -> Result<UERanking, EvalError> {
    let first = votes.first().ok_or(EvalError::NoVotes)?;
    let reference = term_set(&first.voter_id, &first.order)?;
    let mut sums: BTreeMap<&str, f64> = reference.iter().map(|t| (*t, 0.0)).collect();
    for vote in votes {
        let set = term_set(&vote.voter_id, &vote.order)?;
        same_terms(&vote.voter_id, &reference, &set)?;
        for (i, t) in vote.order.iter().enumerate() {
            *sums.get_mut(t.as_str()).expect("checked term") += (i + 1) as f64;
        }
    }
    let n = votes.len() as f64;
    let mean_ranks: BTreeMap<String, f64> = sums.into_iter().map(|(t, s)| (t.to_string(), s / n)).collect();
    let mut order: Vec<String> = mean_ranks.keys().cloned().collect();
    order.sort_by(|a, b| mean_ranks[a].total_cmp(&mean_ranks[b]).then_with(|| a.cmp(b)));
    Ok(UERanking { order, mean_ranks })
}

/// Positions (0-based) of `r2`'s items, checked to be a permutation of `r1`.
fn aligned_positions(r1: &[String], r2: &[String]) -> Result<Vec<usize>, EvalError> {
    let s1 = term_set("first ranking", r1)?;
    let s2 = term_set("second ranking", r2)?;
    same_terms("rankings", &s1, &s2)?;
    let pos2: BTreeMap<&str, usize> = r2.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    Ok(r1.iter().map(|t| pos2[t.as_str()]).collect())
}

/// Kendall τ-a between two strict rankings of the same terms.
pub fn kendall_tau(r1: &[String], r2: &[String]) -> Result<f64, EvalError> {
    let n = r1.len();
    if n < 2 {
        return Err(EvalError::TooFewItems(n));
    }
    let pos = aligned_positions(r1, r2)?;
    let mut discordant = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            if pos[i] > pos[j] {
                discordant += 1;
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    Ok(1.0 - 2.0 * discordant as f64 / pairs)
}

/// Ranks with ties replaced by the average of the positions they span (1-based).
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = alloc::vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / libm::sqrt(va * vb)
}

/// Spearman ρ of a strict system ranking against the UER mean ranks, with
/// midranks for tied means. Zero when either side has no spread.
pub fn spearman_vs_uer(uer: &UERanking, system: &[String]) -> Result<f64, EvalError> {
    let n = uer.order.len();
    if n < 2 {
        return Err(EvalError::TooFewItems(n));
    }
    aligned_positions(&uer.order, system)?;
    let terms: Vec<&String> = uer.mean_ranks.keys().collect();
    let means: Vec<f64> = terms.iter().map(|t| uer.mean_ranks[*t]).collect();
    let truth = midranks(&means);
    let pos: BTreeMap<&str, usize> = system.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let sys: Vec<f64> = terms.iter().map(|t| (pos[t.as_str()] + 1) as f64).collect();
    Ok(pearson(&truth, &sys))
}

/// Correlations of one system ranking against the UER.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemScore {
    pub system: String,
    pub kendall_tau: f64,
    pub spearman_rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub scores: Vec<SystemScore>,
    /// Column headers: "UER" followed by the system names.
    pub columns: Vec<String>,
    /// One row per rank position.
    pub rows: Vec<Vec<String>>,
}

/// Compares each named system ranking with the UER.
pub fn compare_report(uer: &UERanking, systems: &[(String, Vec<String>)]) -> Result<CompareReport, EvalError> {
    let mut scores = Vec::with_capacity(systems.len());
    let mut columns = alloc::vec!["UER".to_string()];
    for (name, order) in systems {
        let tau = kendall_tau(&uer.order, order).map_err(|e| rename(e, name))?;
        let rho = spearman_vs_uer(uer, order).map_err(|e| rename(e, name))?;
        scores.push(SystemScore {
            system: name.clone(),
            kendall_tau: tau,
            spearman_rho: rho,
        });
        columns.push(name.clone());
    }
    let rows = (0..uer.order.len())
        .map(|i| {
            core::iter::once(uer.order[i].clone())
                .chain(systems.iter().map(|(_, order)| order[i].clone()))
                .collect()
        })
        .collect();
    Ok(CompareReport { scores, columns, rows })
}

fn rename(e: EvalError, system: &str) -> EvalError {
    match e {
        EvalError::TermMismatch { missing, unexpected, .. } => EvalError::TermMismatch {
            context: alloc::format!("system {system}"),
            missing,
            unexpected,
        },
        EvalError::Duplicate { term, .. } => EvalError::Duplicate {
            context: alloc::format!("system {system}"),
            term,
        },
        other => other,
    }
}

impl CompareReport {
    /// Plain-text table followed by one score line per system.
    pub fn render_text(&self) -> String {
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let rank_width = self.rows.len().to_string().len().max(1);
        let mut out = String::new();
        let _ = write!(out, "{:>rank_width$}", "#");
        for (c, w) in self.columns.iter().zip(&widths) {
            let _ = write!(out, "  {c:<w$}");
        }
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, "{:>rank_width$}", i + 1);
            for (cell, w) in row.iter().zip(&widths) {
                let _ = write!(out, "  {cell:<w$}");
            }
            out.push('\n');
        }
        if !self.scores.is_empty() {
            out.push('\n');
            let name_width = self.scores.iter().map(|s| s.system.chars().count()).max().unwrap_or(0);
            for s in &self.scores {
                let _ = writeln!(
                    out,
                    "{:<name_width$}  kendall_tau={:+.4}  spearman_rho={:+.4}",
                    s.system, s.kendall_tau, s.spearman_rho
                );
            }
        }
        out
    }
}
