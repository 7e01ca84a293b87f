//! Tie-robust mAP bounds.
//!
//! Non-relevant distances are shifted by a constant ε smaller than any real
//! gap in the data: `D⁺ = D + E` pushes them behind every relevant item they
//! were tied with, `D⁻ = D − E` pulls them in front. The resulting mAP⁺ and
//! mAP⁻ bracket every mAP a tie-resolving sort could report, and both are
//! deterministic functions of the embeddings and labels.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::distances::DistanceMatrix;
use crate::error::{Error, Result};
use crate::ranking::{average_precisions, rank_rows_by, CorrectMatrix, RelevanceMatrix};
use crate::reduce::sorted_mean;

/// Smallest strictly positive difference between two values of the same row.
pub fn min_positive_gap(d: &DistanceMatrix) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut sorted = Vec::with_capacity(d.cols());
    for q in 0..d.rows() {
        sorted.clear();
        sorted.extend_from_slice(d.row(q));
        sorted.sort_by(f64::total_cmp);
        for w in sorted.windows(2) {
            let gap = w[1] - w[0];
            if gap > 0.0 && best.is_none_or(|b| gap < b) {
                best = Some(gap);
            }
        }
    }
    best
}

/// Half the smallest positive within-row gap, or `1.0` if every row is constant.
pub fn epsilon_select(d: &DistanceMatrix) -> f64 {
    min_positive_gap(d).map_or(1.0, |g| g / 2.0)
}

/// `E = (1 − R)·ε`: ε on every non-relevant cell, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationMatrix {
    rows: usize,
    cols: usize,
    epsilon: f64,
    values: Vec<f64>,
}

impl PerturbationMatrix {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, q: usize, k: usize) -> f64 {
        self.values[q * self.cols + k]
    }

    pub fn row(&self, q: usize) -> &[f64] {
        &self.values[q * self.cols..(q + 1) * self.cols]
    }

    /// `D + sign·E` materialized in `f64`. For display and export; ranking
    /// uses [`PerturbationMatrix::compare`], which does not round.
    pub fn apply(&self, d: &DistanceMatrix, sign: Sign) -> Result<Vec<f64>> {
        if d.shape() != self.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                found: d.shape(),
            });
        }
        Ok(d.values()
            .iter()
            .zip(&self.values)
            .map(|(&dv, &e)| match sign {
                Sign::Plus => dv + e,
                Sign::Minus => dv - e,
            })
            .collect())
    }

    /// Compares `D(q,a) ± E(q,a)` with `D(q,b) ± E(q,b)` as real numbers.
    ///
    /// ε is validated to lie below every positive gap of `d`, so unequal
    /// distances keep their order and only exact ties are decided by `E`.
    pub fn compare(&self, d: &DistanceMatrix, sign: Sign, q: usize, a: usize, b: usize) -> Ordering {
        let (da, db) = (d.get(q, a), d.get(q, b));
        if da != db {
            return da.total_cmp(&db);
        }
        let (ea, eb) = (self.get(q, a), self.get(q, b));
        match sign {
            Sign::Plus => ea.total_cmp(&eb),
            Sign::Minus => eb.total_cmp(&ea),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

pub fn perturbation(r: &RelevanceMatrix, epsilon: f64) -> Result<PerturbationMatrix> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidEpsilon { epsilon, gap: None });
    }
    let (rows, cols) = r.shape();
    let values = (0..rows)
        .flat_map(|q| r.row(q).iter().map(move |&rel| if rel { 0.0 } else { epsilon }))
        .collect();
    Ok(PerturbationMatrix {
        rows,
        cols,
        epsilon,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapBounds {
    pub map_minus: f64,
    pub map_plus: f64,
    pub epsilon_used: f64,
}

/// Per-query AP under `D⁻` and `D⁺`, with the ε used.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryBounds {
    pub ap_minus: Vec<f64>,
    pub ap_plus: Vec<f64>,
    pub epsilon_used: f64,
}

fn checked_epsilon(d: &DistanceMatrix, epsilon: Option<f64>) -> Result<f64> {
    let gap = min_positive_gap(d);
    match epsilon {
        None => Ok(gap.map_or(1.0, |g| g / 2.0)),
        Some(e) if e > 0.0 && e.is_finite() && gap.is_none_or(|g| e < g) => Ok(e),
        Some(e) => Err(Error::InvalidEpsilon { epsilon: e, gap }),
    }
}

/// Ranking of `D + sign·E` for every query.
pub fn rank_perturbed(
    d: &DistanceMatrix,
    r: &RelevanceMatrix,
    sign: Sign,
    epsilon: Option<f64>,
) -> Result<CorrectMatrix> {
    if d.shape() != r.shape() {
        return Err(Error::ShapeMismatch {
            expected: r.shape(),
            found: d.shape(),
        });
    }
    let e = perturbation(r, checked_epsilon(d, epsilon)?)?;
    rank_rows_by(d, r, |q, a, b| e.compare(d, sign, q, a, b).then(a.cmp(&b)))
}

pub fn per_query_bounds(
    d: &DistanceMatrix,
    r: &RelevanceMatrix,
    epsilon: Option<f64>,
) -> Result<QueryBounds> {
    let epsilon_used = checked_epsilon(d, epsilon)?;
    let plus = rank_perturbed(d, r, Sign::Plus, Some(epsilon_used))?;
    let minus = rank_perturbed(d, r, Sign::Minus, Some(epsilon_used))?;
    Ok(QueryBounds {
        ap_minus: average_precisions(&minus)?,
        ap_plus: average_precisions(&plus)?,
        epsilon_used,
    })
}

/// mAP⁻ and mAP⁺. `epsilon` overrides the automatic choice and must be
/// positive and strictly below the smallest positive within-row gap.
pub fn map_bounds(d: &DistanceMatrix, r: &RelevanceMatrix, epsilon: Option<f64>) -> Result<MapBounds> {
    let b = per_query_bounds(d, r, epsilon)?;
    let bounds = MapBounds {
        map_minus: sorted_mean(&b.ap_minus),
        map_plus: sorted_mean(&b.ap_plus),
        epsilon_used: b.epsilon_used,
    };
    if bounds.map_minus > bounds.map_plus {
        return Err(Error::Invariant("map_minus exceeds map_plus"));
    }
    Ok(bounds)
}

/// `true` if some query has relevant and non-relevant items at one distance.
pub fn has_mixed_ties(d: &DistanceMatrix, r: &RelevanceMatrix) -> bool {
    (0..d.rows()).any(|q| {
        let mut cells: Vec<(f64, bool)> = r
            .candidates(q)
            .map(|k| (d.get(q, k), r.is_relevant(q, k)))
            .collect();
        cells.sort_by(|a, b| a.0.total_cmp(&b.0));
        cells
            .chunk_by(|a, b| a.0 == b.0)
            .any(|g| g.iter().any(|c| c.1) && g.iter().any(|c| !c.1))
    })
}
