//! The occurrence-count interface every measure consumer draws from.

use alloc::string::String;
use thiserror::Error;

use crate::measures::{HitCounts, MeasureError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SourceError {
    /// Network or service failure; retrying may succeed.
    #[error("transport error: {0}")]
    Transport(String),
    #[error("fixture miss: no recorded entry for key {0}")]
    FixtureMiss(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

impl SourceError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, SourceError::Transport(_))
    }
}

/// Anything that can report document hit counts for term conjunctions.
///
/// A term may itself be a phrase (`"expo 2013"`); each source decides how a
/// phrase is matched.
pub trait OccurrenceSource {
    /// Number of documents containing all of `terms`.
    fn count(&self, terms: &[&str]) -> Result<u64, SourceError>;

    /// Total number of indexed documents (M).
    fn total(&self) -> Result<u64, SourceError>;

    /// Hit counts for the pair (x, y).
    fn pair_counts(&self, x: &str, y: &str) -> Result<HitCounts, SourceError> {
        let f_x = self.count(&[x])?;
        let f_y = self.count(&[y])?;
        let f_xy = self.count(&[x, y])?;
        Ok(HitCounts::new(f_x, f_y, f_xy, self.total()?)?)
    }
}

impl<T: OccurrenceSource + ?Sized> OccurrenceSource for &T {
    fn count(&self, terms: &[&str]) -> Result<u64, SourceError> {
        (**self).count(terms)
    }

    fn total(&self) -> Result<u64, SourceError> {
        (**self).total()
    }
}
