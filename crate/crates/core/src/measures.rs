//! Occurrence-count proximity measures: PMI, NGD and the blended PMING distance.
//!
//! Every measure works on document hit counts for a pair of terms. All
//! logarithms are base 2.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default blend weight between the PMI and NGD components.
pub const DEFAULT_RHO: f64 = 0.3;

/// Floor applied to the context maxima so that degenerate contexts never divide by zero.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// PMI of a pair that never co-occurs.
pub const PMI_NEVER_COOCCUR: f64 = f64::NEG_INFINITY;

/// NGD of a pair that never co-occurs ("unrelated").
pub const NGD_UNRELATED: f64 = f64::INFINITY;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("inconsistent counts: joint count {f_xy} exceeds min({f_x}, {f_y})")]
    JointExceedsMarginal { f_x: u64, f_y: u64, f_xy: u64 },
    #[error("inconsistent counts: term count {count} exceeds total {total}")]
    CountExceedsTotal { count: u64, total: u64 },
    #[error("total document count must be at least 1")]
    ZeroTotal,
    #[error("unknown term: zero occurrence count")]
    UnknownTerm,
    #[error("M too small: total {total} must exceed max(f_x, f_y) = {max}")]
    TotalTooSmall { total: u64, max: u64 },
    #[error("empty context")]
    EmptyContext,
    #[error("invalid norms: {0}")]
    InvalidNorms(&'static str),
}

/// Occurrence statistics for one term pair.
///
/// `f_x` and `f_y` are the document counts of each term, `f_xy` the count of
/// documents holding both, `total` the number of indexed documents (M).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HitCounts {
    f_x: u64,
    f_y: u64,
    f_xy: u64,
    total: u64,
}

impl HitCounts {
    pub fn new(f_x: u64, f_y: u64, f_xy: u64, total: u64) -> Result<Self, MeasureError> {
        if total == 0 {
            return Err(MeasureError::ZeroTotal);
        }
        if f_xy > f_x.min(f_y) {
            return Err(MeasureError::JointExceedsMarginal { f_x, f_y, f_xy });
        }
        let max = f_x.max(f_y);
        if max > total {
            return Err(MeasureError::CountExceedsTotal { count: max, total });
        }
        Ok(Self { f_x, f_y, f_xy, total })
    }

    pub fn f_x(&self) -> u64 {
        self.f_x
    }

    pub fn f_y(&self) -> u64 {
        self.f_y
    }

    pub fn f_xy(&self) -> u64 {
        self.f_xy
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// The same pair with the roles of x and y exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            f_x: self.f_y,
            f_y: self.f_x,
            ..*self
        }
    }

    /// Orders the pair so that `f_x >= f_y`.
    fn ordered(&self) -> Self {
        if self.f_x >= self.f_y {
            *self
        } else {
            self.swapped()
        }
    }

    fn require_known(&self) -> Result<(), MeasureError> {
        if self.f_x == 0 || self.f_y == 0 {
            Err(MeasureError::UnknownTerm)
        } else {
            Ok(())
        }
    }
}

/// Per-context normalization state for PMING.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextNorms {
    mu1: f64,
    mu2: f64,
    rho: f64,
    epsilon: f64,
}

impl ContextNorms {
    /// Builds norms from explicit maxima. The maxima are floored at `epsilon`.
    pub fn new(mu1: f64, mu2: f64, rho: f64, epsilon: f64) -> Result<Self, MeasureError> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(MeasureError::InvalidNorms("epsilon must be positive and finite"));
        }
        if !(0.0..=1.0).contains(&rho) {
            return Err(MeasureError::InvalidNorms("rho must lie in [0, 1]"));
        }
        if mu1.is_nan() || mu2.is_nan() || mu1.is_infinite() || mu2.is_infinite() {
            return Err(MeasureError::InvalidNorms("context maxima must be finite"));
        }
        Ok(Self {
            mu1: mu1.max(epsilon),
            mu2: mu2.max(epsilon),
            rho,
            epsilon,
        })
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }

    pub fn mu2(&self) -> f64 {
        self.mu2
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Pointwise mutual information, `log2(f_xy * M / (f_x * f_y))`.
///
/// Returns [`PMI_NEVER_COOCCUR`] when the terms never co-occur.
pub fn pmi(h: &HitCounts) -> Result<f64, MeasureError> {
    h.require_known()?;
    if h.f_xy == 0 {
        return Ok(PMI_NEVER_COOCCUR);
    }
    let joint = h.f_xy as u128 * h.total as u128;
    let independent = h.f_x as u128 * h.f_y as u128;
    Ok(log2_ratio(joint, independent))
}

/// `log2(num / den)` for positive integers, accurate near a ratio of 1 where
/// subtracting two logarithms would cancel.
fn log2_ratio(num: u128, den: u128) -> f64 {
    if num == den {
        return 0.0;
    }
    if num < 2 * den && 2 * num > den {
        let x = if num > den {
            (num - den) as f64 / den as f64
        } else {
            -((den - num) as f64 / den as f64)
        };
        return libm::log1p(x) * core::f64::consts::LOG2_E;
    }
    libm::log2(num as f64 / den as f64)
}

/// Normalized Google distance between the two terms.
///
/// Symmetric in x and y. Returns [`NGD_UNRELATED`] when the terms never co-occur.
pub fn ngd(h: &HitCounts) -> Result<f64, MeasureError> {
    h.require_known()?;
    let o = h.ordered();
    if o.total <= o.f_x {
        return Err(MeasureError::TotalTooSmall {
            total: o.total,
            max: o.f_x,
        });
    }
    if o.f_xy == 0 {
        return Ok(NGD_UNRELATED);
    }
    Ok(log2_ratio(o.f_x as u128, o.f_xy as u128) / log2_ratio(o.total as u128, o.f_y as u128))
}

/// Computes the context maxima of PMI and NGD over `pairs`.
///
/// Pairs that never co-occur carry infinite sentinels and do not take part in
/// either maximum.
pub fn context_norms(pairs: &[HitCounts], rho: f64, epsilon: f64) -> Result<ContextNorms, MeasureError> {
    if pairs.is_empty() {
        return Err(MeasureError::EmptyContext);
    }
    let mut max_pmi = f64::NEG_INFINITY;
    let mut max_ngd = f64::NEG_INFINITY;
    for pair in pairs {
        let p = pmi(pair)?;
        let n = ngd(pair)?;
        if p.is_finite() {
            max_pmi = max_pmi.max(p);
        }
        if n.is_finite() {
            max_ngd = max_ngd.max(n);
        }
    }
    ContextNorms::new(max_pmi.max(epsilon), max_ngd.max(epsilon), rho, epsilon)
}

/// PMING distance of a pair in the context described by `norms`, in `[0, 1]`.
///
/// Pairs that never co-occur sit at the maximal distance 1.0.
pub fn pming(h: &HitCounts, norms: &ContextNorms) -> Result<f64, MeasureError> {
    let o = h.ordered();
    let p = pmi(&o)?;
    let n = ngd(&o)?;
    if o.f_xy == 0 {
        return Ok(1.0);
    }
    Ok(pming_from_components(p, n, norms))
}

/// Blends precomputed PMI and NGD values; the result is clamped to `[0, 1]`.
pub fn pming_from_components(pmi_val: f64, ngd_val: f64, norms: &ContextNorms) -> f64 {
    let rho = norms.rho;
    let blended = rho * (1.0 - pmi_val / norms.mu1) + (1.0 - rho) * (ngd_val / norms.mu2);
    if blended.is_nan() {
        return 1.0;
    }
    blended.clamp(0.0, 1.0)
}

/// PMI, NGD and PMING of one pair, kept together for auditing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub pmi: f64,
    pub ngd: f64,
    pub distance: f64,
}

/// Scores every pair against norms computed over the same pairs.
pub fn score_context(pairs: &[HitCounts], rho: f64, epsilon: f64) -> Result<(ContextNorms, Vec<Scored>), MeasureError> {
    let norms = context_norms(pairs, rho, epsilon)?;
    let mut out = Vec::with_capacity(pairs.len());
    for pair in pairs {
        out.push(Scored {
            pmi: pmi(pair)?,
            ngd: ngd(pair)?,
            distance: pming(pair, &norms)?,
        });
    }
    Ok((norms, out))
}
