//! Near-collision audit.
//!
//! A collision is two database items at the same distance from a query. For
//! inspection the notion is widened to a threshold: after sorting a row,
//! consecutive distances closer than the threshold are chained into one run.
//! Chaining is transitive, so a run can span more than the threshold.

use alloc::vec::Vec;

use crate::distances::{
    pairwise_distances, DistanceMatrix, DistanceMetricKind, EmbeddingMatrix, PrecisionMode,
};
use crate::error::{Error, Result};
use crate::ranking::RelevanceMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionReport {
    pub threshold: f64,
    pub metric: Option<DistanceMetricKind>,
    /// Chained runs of two or more cells.
    pub total_runs: u64,
    /// Runs holding both relevant and non-relevant cells.
    pub mixed_runs: u64,
    pub colliding_cells: u64,
    /// Colliding cells per 0-based rank position.
    pub per_rank_histogram: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellState {
    NoCollision,
    CollisionRelevant,
    CollisionIrrelevant,
}

/// Queries by rank positions, each cell flagged with its collision state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollisionMap {
    rows: usize,
    cols: usize,
    cells: Vec<CellState>,
}

impl CollisionMap {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> CellState {
        self.cells[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[CellState] {
        &self.cells[row * self.cols..(row + 1) * self.cols]
    }

    pub fn colliding(&self) -> usize {
        self.cells
            .iter()
            .filter(|&&c| c != CellState::NoCollision)
            .count()
    }

    /// Drops the first `skip` query rows.
    pub fn crop_rows(&self, skip: usize) -> Self {
        let skip = skip.min(self.rows);
        Self {
            rows: self.rows - skip,
            cols: self.cols,
            cells: self.cells[skip * self.cols..].to_vec(),
        }
    }
}

fn check(d: &DistanceMatrix, r: &RelevanceMatrix, threshold: f64) -> Result<()> {
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::InvalidThreshold(threshold));
    }
    if d.shape() != r.shape() {
        return Err(Error::ShapeMismatch {
            expected: r.shape(),
            found: d.shape(),
        });
    }
    Ok(())
}

/// Sorted (distance, relevant) cells of one row and the `[start, end)` rank
/// ranges of its thresholded runs.
/// Candidates sorted by distance, with their relevance, and the half-open
/// index ranges of the thresholded runs.
type RowRuns = (Vec<(f64, bool)>, Vec<(usize, usize)>);

fn row_runs(d: &DistanceMatrix, r: &RelevanceMatrix, q: usize, threshold: f64) -> RowRuns {
    let mut cells: Vec<(usize, f64, bool)> = r
        .candidates(q)
        .map(|k| (k, d.get(q, k), r.is_relevant(q, k)))
        .collect();
    cells.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let cells: Vec<(f64, bool)> = cells.into_iter().map(|c| (c.1, c.2)).collect();
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=cells.len() {
        if i == cells.len() || cells[i].0 - cells[i - 1].0 >= threshold {
            if i - start >= 2 {
                runs.push((start, i));
            }
            start = i;
        }
    }
    (cells, runs)
}

pub fn collision_counts(d: &DistanceMatrix, r: &RelevanceMatrix, threshold: f64) -> Result<CollisionReport> {
    check(d, r, threshold)?;
    let width = (0..r.rows()).map(|q| r.row_len(q)).max().unwrap_or(0);
    let mut report = CollisionReport {
        threshold,
        metric: None,
        total_runs: 0,
        mixed_runs: 0,
        colliding_cells: 0,
        per_rank_histogram: alloc::vec![0; width],
    };
    for q in 0..d.rows() {
        let (cells, runs) = row_runs(d, r, q, threshold);
        for (start, end) in runs {
            let group = &cells[start..end];
            report.total_runs += 1;
            if group.iter().any(|c| c.1) && group.iter().any(|c| !c.1) {
                report.mixed_runs += 1;
            }
            report.colliding_cells += (end - start) as u64;
            for slot in &mut report.per_rank_histogram[start..end] {
                *slot += 1;
            }
        }
    }
    Ok(report)
}

pub fn render_collision_map(d: &DistanceMatrix, r: &RelevanceMatrix, threshold: f64) -> Result<CollisionMap> {
    check(d, r, threshold)?;
    let cols = (0..r.rows()).map(|q| r.row_len(q)).max().unwrap_or(0);
    let mut cells = alloc::vec![CellState::NoCollision; d.rows() * cols];
    for q in 0..d.rows() {
        let (sorted, runs) = row_runs(d, r, q, threshold);
        for (start, end) in runs {
            for (i, &(_, rel)) in sorted.iter().enumerate().take(end).skip(start) {
                cells[q * cols + i] = if rel {
                    CellState::CollisionRelevant
                } else {
                    CellState::CollisionIrrelevant
                };
            }
        }
    }
    Ok(CollisionMap {
        rows: d.rows(),
        cols,
        cells,
    })
}

/// One collision report per distance metric on the same embeddings.
/// `threshold` supplies the visibility threshold used for each metric.
pub fn metric_comparison(
    queries: &EmbeddingMatrix,
    database: &EmbeddingMatrix,
    r: &RelevanceMatrix,
    precision: PrecisionMode,
    threshold: impl Fn(DistanceMetricKind) -> f64,
) -> Result<Vec<CollisionReport>> {
    DistanceMetricKind::ALL
        .iter()
        .map(|&metric| {
            let d = pairwise_distances(queries, database, metric, precision)?;
            let mut report = collision_counts(&d, r, threshold(metric))?;
            report.metric = Some(metric);
            Ok(report)
        })
        .collect()
}
