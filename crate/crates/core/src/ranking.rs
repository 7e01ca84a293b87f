//! Relevance, ranking and the precision-based metrics derived from it.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::distances::DistanceMatrix;
use crate::error::{Error, Result};
use crate::reduce::sorted_mean;
use crate::seed::{derive_seed, rng};

/// Class label per sample. Labels are opaque tokens compared for equality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector(Vec<String>);

impl LabelVector {
    pub fn new<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(labels.into_iter().map(Into::into).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn get(&self, i: usize) -> &str {
        &self.0[i]
    }

    /// Labels reordered so that entry `i` is `self[order[i]]`.
    pub fn select(&self, order: &[usize]) -> Self {
        Self(order.iter().map(|&i| self.0[i].clone()).collect())
    }

    /// Dense class ids in order of first appearance.
    pub fn class_ids(&self) -> Vec<usize> {
        let mut ids = BTreeMap::new();
        self.0
            .iter()
            .map(|l| {
                let next = ids.len();
                *ids.entry(l.as_str()).or_insert(next)
            })
            .collect()
    }

    /// Member count per class, keyed by label.
    pub fn class_sizes(&self) -> BTreeMap<&str, usize> {
        let mut sizes = BTreeMap::new();
        for l in &self.0 {
            *sizes.entry(l.as_str()).or_insert(0) += 1;
        }
        sizes
    }
}

/// Binary relevance of every (query, database) cell, plus at most one
/// excluded database index per query (the query's own sample under
/// leave-one-out evaluation).
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceMatrix {
    rows: usize,
    cols: usize,
    relevant: Vec<bool>,
    excluded: Vec<Option<usize>>,
}

impl RelevanceMatrix {
    /// Builds from raw cells. Rejects queries left with no relevant,
    /// non-excluded cell.
    pub fn new(rows: usize, cols: usize, relevant: Vec<bool>, excluded: Vec<Option<usize>>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        if relevant.len() != rows * cols || excluded.len() != rows {
            return Err(Error::ShapeMismatch {
                expected: (rows, cols),
                found: (excluded.len(), relevant.len() / rows.max(1)),
            });
        }
        for (q, ex) in excluded.iter().enumerate() {
            if let Some(index) = *ex {
                if index >= cols {
                    return Err(Error::SelfMapOutOfRange { query: q, index });
                }
            }
        }
        let m = Self {
            rows,
            cols,
            relevant,
            excluded,
        };
        let singletons: Vec<usize> = (0..rows).filter(|&q| m.relevant_count(q) == 0).collect();
        if !singletons.is_empty() {
            return Err(Error::SingletonQueries { queries: singletons });
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, q: usize) -> &[bool] {
        &self.relevant[q * self.cols..(q + 1) * self.cols]
    }

    pub fn is_relevant(&self, q: usize, k: usize) -> bool {
        self.relevant[q * self.cols + k]
    }

    pub fn excluded(&self, q: usize) -> Option<usize> {
        self.excluded[q]
    }

    pub fn is_excluded(&self, q: usize, k: usize) -> bool {
        self.excluded[q] == Some(k)
    }

    /// Database indices of row `q` that take part in ranking.
    pub fn candidates(&self, q: usize) -> impl Iterator<Item = usize> + '_ {
        let ex = self.excluded[q];
        (0..self.cols).filter(move |&k| Some(k) != ex)
    }

    /// Relevant, non-excluded cells in row `q`.
    pub fn relevant_count(&self, q: usize) -> usize {
        self.candidates(q).filter(|&k| self.is_relevant(q, k)).count()
    }

    /// Cells per row after exclusion.
    pub fn row_len(&self, q: usize) -> usize {
        self.cols - usize::from(self.excluded[q].is_some())
    }
}

/// Relevance of each database item to each query: 1 iff the labels match.
///
/// `self_map[q]`, when given, names the database index holding query `q`
/// itself; that cell is excluded from every downstream ranking.
pub fn relevance(
    query_labels: &LabelVector,
    db_labels: &LabelVector,
    self_map: Option<&[usize]>,
) -> Result<RelevanceMatrix> {
    if query_labels.is_empty() || db_labels.is_empty() {
        return Err(Error::EmptyLabels);
    }
    let (rows, cols) = (query_labels.len(), db_labels.len());
    let excluded = match self_map {
        Some(map) => {
            if map.len() != rows {
                return Err(Error::LabelCount {
                    expected: rows,
                    found: map.len(),
                });
            }
            map.iter().map(|&k| Some(k)).collect()
        }
        None => alloc::vec![None; rows],
    };
    let mut relevant = Vec::with_capacity(rows * cols);
    for ql in query_labels.as_slice() {
        relevant.extend(db_labels.as_slice().iter().map(|dl| dl == ql));
    }
    RelevanceMatrix::new(rows, cols, relevant, excluded)
}

/// How the ranking step orders items at exactly equal distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TiePolicy {
    /// Ascending database index.
    StableByIndex,
    /// Relevant items first inside each tie group.
    Favorable,
    /// Non-relevant items first inside each tie group.
    Unfavorable,
    /// Each tie group shuffled by a generator seeded from `(seed, query)`.
    SeededShuffle(u64),
}

impl fmt::Display for TiePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TiePolicy::StableByIndex => f.write_str("stable"),
            TiePolicy::Favorable => f.write_str("favorable"),
            TiePolicy::Unfavorable => f.write_str("unfavorable"),
            TiePolicy::SeededShuffle(seed) => write!(f, "shuffle:{seed}"),
        }
    }
}

impl FromStr for TiePolicy {
    type Err = crate::distances::UnknownVariant;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        match s {
            "stable" | "stable-by-index" => Ok(TiePolicy::StableByIndex),
            "favorable" => Ok(TiePolicy::Favorable),
            "unfavorable" => Ok(TiePolicy::Unfavorable),
            _ => s
                .strip_prefix("shuffle:")
                .and_then(|seed| seed.parse().ok())
                .map(TiePolicy::SeededShuffle)
                .ok_or(crate::distances::UnknownVariant),
        }
    }
}

/// One ranked query: database indices by rank and their relevance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectRow {
    order: Vec<usize>,
    hits: Vec<bool>,
}

impl CorrectRow {
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn hits(&self) -> &[bool] {
        &self.hits
    }

    pub fn relevant_count(&self) -> usize {
        self.hits.iter().filter(|&&h| h).count()
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}

/// Relevance rows reordered by ascending distance. Rows may differ in length
/// when only some queries exclude a database cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectMatrix {
    rows: Vec<CorrectRow>,
}

impl CorrectMatrix {
    pub fn rows(&self) -> &[CorrectRow] {
        &self.rows
    }

    pub fn row(&self, q: usize) -> &CorrectRow {
        &self.rows[q]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Builds from hit rows alone; the order is the identity.
    pub fn from_hits<R: AsRef<[bool]>>(rows: &[R]) -> Self {
        Self {
            rows: rows
                .iter()
                .map(|r| CorrectRow {
                    order: (0..r.as_ref().len()).collect(),
                    hits: r.as_ref().to_vec(),
                })
                .collect(),
        }
    }
}

fn check_shapes(d: &DistanceMatrix, r: &RelevanceMatrix) -> Result<()> {
    if d.shape() != r.shape() {
        return Err(Error::ShapeMismatch {
            expected: r.shape(),
            found: d.shape(),
        });
    }
    Ok(())
}

/// Ranks every row of `d` with `cmp(q, a, b)` as the total order on database
/// indices, dropping excluded cells.
pub(crate) fn rank_rows_by<F>(d: &DistanceMatrix, r: &RelevanceMatrix, mut cmp: F) -> Result<CorrectMatrix>
where
    F: FnMut(usize, usize, usize) -> Ordering,
{
    check_shapes(d, r)?;
    let rows = (0..d.rows())
        .map(|q| {
            let mut order: Vec<usize> = r.candidates(q).collect();
            order.sort_by(|&a, &b| cmp(q, a, b));
            let hits = order.iter().map(|&k| r.is_relevant(q, k)).collect();
            CorrectRow { order, hits }
        })
        .collect();
    Ok(CorrectMatrix { rows })
}

/// Sorts each relevance row by ascending distance, resolving exact ties
/// according to `policy`, and drops excluded cells.
pub fn rank_correct(d: &DistanceMatrix, r: &RelevanceMatrix, policy: TiePolicy) -> Result<CorrectMatrix> {
    let by_distance = |q: usize, a: usize, b: usize| d.get(q, a).total_cmp(&d.get(q, b));
    match policy {
        TiePolicy::StableByIndex => rank_rows_by(d, r, |q, a, b| by_distance(q, a, b).then(a.cmp(&b))),
        TiePolicy::Favorable => rank_rows_by(d, r, |q, a, b| {
            by_distance(q, a, b)
                .then(r.is_relevant(q, b).cmp(&r.is_relevant(q, a)))
                .then(a.cmp(&b))
        }),
        TiePolicy::Unfavorable => rank_rows_by(d, r, |q, a, b| {
            by_distance(q, a, b)
                .then(r.is_relevant(q, a).cmp(&r.is_relevant(q, b)))
                .then(a.cmp(&b))
        }),
        TiePolicy::SeededShuffle(seed) => {
            let mut c = rank_rows_by(d, r, |q, a, b| by_distance(q, a, b).then(a.cmp(&b)))?;
            for (q, row) in c.rows.iter_mut().enumerate() {
                let mut gen = rng(derive_seed(seed, &[q as u64]));
                let mut start = 0;
                while start < row.order.len() {
                    let value = d.get(q, row.order[start]);
                    let mut end = start + 1;
                    while end < row.order.len() && d.get(q, row.order[end]) == value {
                        end += 1;
                    }
                    for i in (start + 1..end).rev() {
                        let j = gen.random_range(start..=i);
                        row.order.swap(i, j);
                    }
                    start = end;
                }
                row.hits = row.order.iter().map(|&k| r.is_relevant(q, k)).collect();
            }
            Ok(c)
        }
    }
}

/// Precision and recall at every rank of every query.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionRecallMatrices {
    pub precision: Vec<Vec<f64>>,
    pub recall: Vec<Vec<f64>>,
}

pub fn precision_recall(c: &CorrectMatrix) -> Result<PrecisionRecallMatrices> {
    let mut precision = Vec::with_capacity(c.len());
    let mut recall = Vec::with_capacity(c.len());
    for (q, row) in c.rows.iter().enumerate() {
        let total = row.relevant_count();
        if total == 0 {
            return Err(Error::NoRelevant { row: q });
        }
        let mut hits = 0usize;
        let mut pr = Vec::with_capacity(row.len());
        let mut rc = Vec::with_capacity(row.len());
        for (i, &h) in row.hits.iter().enumerate() {
            hits += usize::from(h);
            pr.push(hits as f64 / (i + 1) as f64);
            rc.push(hits as f64 / total as f64);
        }
        precision.push(pr);
        recall.push(rc);
    }
    Ok(PrecisionRecallMatrices { precision, recall })
}

/// Mean of the precision values at the ranks holding a relevant item.
pub fn average_precision(hits: &[bool]) -> Result<f64> {
    let mut found = 0usize;
    let mut sum = 0.0;
    for (i, &h) in hits.iter().enumerate() {
        if h {
            found += 1;
            sum += found as f64 / (i + 1) as f64;
        }
    }
    if found == 0 {
        return Err(Error::NoRelevant { row: 0 });
    }
    Ok(sum / found as f64)
}

/// AP of every row, in query order.
pub fn average_precisions(c: &CorrectMatrix) -> Result<Vec<f64>> {
    c.rows
        .iter()
        .enumerate()
        .map(|(q, row)| average_precision(&row.hits).map_err(|_| Error::NoRelevant { row: q }))
        .collect()
}

/// Mean of per-query AP, summed in sorted order so the value does not
/// depend on query order.
pub fn mean_average_precision(c: &CorrectMatrix) -> Result<f64> {
    Ok(sorted_mean(&average_precisions(c)?))
}

/// Precision at rank `k` (1-based) for every query.
pub fn precision_at_k(c: &CorrectMatrix, k: usize) -> Result<Vec<f64>> {
    c.rows
        .iter()
        .map(|row| {
            if k == 0 || k > row.len() {
                return Err(Error::RankOutOfRange { k, len: row.len() });
            }
            let hits = row.hits[..k].iter().filter(|&&h| h).count();
            Ok(hits as f64 / k as f64)
        })
        .collect()
}
