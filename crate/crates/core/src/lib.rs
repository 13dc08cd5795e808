//! Concept-distance query expansion.
//!
//! Candidate expansion terms for a seed query are gathered from a lexical
//! taxonomy, corpus co-occurrence and learned user choices, then ranked by
//! the PMING distance: a blend of pointwise mutual information and the
//! normalized Google distance, each normalized over the current context.
//!
//! The crate is `no_std` and only needs `alloc`. IO, networking and the
//! service layer live in the companion `cqe` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod eval;
pub mod lexical;
pub mod measures;
pub mod pool;
pub mod rank;
pub mod source;
pub mod text;

pub use corpus::{CorpusError, CorpusIndex, DocRecord};
pub use eval::{aggregate_uer, compare_report, kendall_tau, CompareReport, EvalError, UERanking, VoterRanking};
pub use lexical::{Direction, ExpansionPolicy, GraphError, LexicalGraph, Relation};
pub use measures::{context_norms, ngd, pmi, pming, pming_from_components, ContextNorms, HitCounts, MeasureError};
pub use pool::{Candidate, CandidateSource, PoolError, QueryKey, QueryPool, QueryPoolEntry};
pub use rank::{rank_candidates, Components, RankError, RankedCandidate, Ranking};
pub use source::{OccurrenceSource, SourceError};
