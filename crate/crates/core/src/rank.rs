//! Ranking of expansion candidates by PMING distance to the seed query.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{self, ContextNorms, HitCounts};
use crate::pool::{Candidate, CandidateSource, QueryKey};
use crate::source::{OccurrenceSource, SourceError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RankError {
    #[error("no candidates to rank")]
    NoCandidates,
    #[error("ranking is empty: every candidate was dropped")]
    AllDropped(Vec<(String, SourceError)>),
}

/// A candidate with its distance to the seed and the components behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub term: String,
    pub distance: f64,
    pub source: CandidateSource,
    pub components: Components,
}

/// PMI and NGD of the seed/candidate pair; `None` when the pair never co-occurs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub pmi: Option<f64>,
    pub ngd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    /// Ascending distance, ties by term.
    pub candidates: Vec<RankedCandidate>,
    /// Candidates whose counts could not be obtained.
    pub dropped: Vec<(String, SourceError)>,
    /// `None` when no candidate co-occurs with the seed.
    pub norms: Option<ContextNorms>,
}

/// Sorts by ascending distance, breaking ties by term.
pub fn sort_ranked(list: &mut [RankedCandidate]) {
    list.sort_by(|a, b| a.distance.total_cmp(&b.distance).then_with(|| a.term.cmp(&b.term)));
}

/// Scores every candidate against the seed and sorts them.
///
/// The normalization context is the seed paired with every candidate whose
/// counts were obtained. Candidates the source cannot count are dropped with a
/// warning. A candidate (or seed) with zero occurrences sits at distance 1.0.
pub fn rank_candidates<S>(seed: &QueryKey, candidates: &[Candidate], source: &S, rho: f64, epsilon: f64) -> Result<Ranking, RankError>
where
    S: OccurrenceSource + ?Sized,
{
    if candidates.is_empty() {
        return Err(RankError::NoCandidates);
    }
    let mut counted: Vec<(&Candidate, HitCounts)> = Vec::with_capacity(candidates.len());
    let mut dropped = Vec::new();
    for cand in candidates {
        let counts = source.pair_counts(seed.canonical(), &cand.term).and_then(|h| {
            // Reject counts the measures cannot use (M not above the term counts).
            if h.f_x() > 0 && h.f_y() > 0 {
                measures::ngd(&h)?;
            }
            Ok(h)
        });
        match counts {
            Ok(h) => counted.push((cand, h)),
            Err(e) => {
                log::warn!("dropping candidate {:?}: {}", cand.term, e);
                dropped.push((cand.term.clone(), e));
            }
        }
    }
    if counted.is_empty() {
        return Err(RankError::AllDropped(dropped));
    }

    let context: Vec<HitCounts> = counted
        .iter()
        .map(|(_, h)| *h)
        .filter(|h| h.f_x() > 0 && h.f_y() > 0)
        .collect();
    let norms = if context.is_empty() {
        None
    } else {
        // Every pair in the context passed the ngd check above.
        Some(measures::context_norms(&context, rho, epsilon).expect("validated context"))
    };

    let mut ranked: Vec<RankedCandidate> = counted
        .into_iter()
        .map(|(cand, h)| score(cand, &h, norms.as_ref()))
        .collect();
    sort_ranked(&mut ranked);
    Ok(Ranking {
        candidates: ranked,
        dropped,
        norms,
    })
}

fn score(cand: &Candidate, h: &HitCounts, norms: Option<&ContextNorms>) -> RankedCandidate {
    let unrelated = RankedCandidate {
        term: cand.term.to_string(),
        distance: 1.0,
        source: cand.source,
        components: Components::default(),
    };
    let norms = match norms {
        Some(n) if h.f_x() > 0 && h.f_y() > 0 && h.f_xy() > 0 => n,
        _ => return unrelated,
    };
    let pmi = measures::pmi(h).expect("known terms");
    let ngd = measures::ngd(h).expect("validated total");
    RankedCandidate {
        distance: measures::pming(h, norms).expect("validated pair"),
        components: Components {
            pmi: Some(pmi),
            ngd: Some(ngd),
        },
        ..unrelated
    }
}
