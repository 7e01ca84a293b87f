//! Embedding matrices and pairwise distance computation.
//!
//! Every distance is accumulated in `f64` directly from the two rows, never
//! through a norm-expansion shortcut, so results are bit-reproducible. The
//! emulated single-precision mode rounds only the final distance to the
//! nearest `f32`, which isolates the effect of output quantization.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// Dense row-major matrix of finite sample embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    values: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || dim == 0 {
            return Err(Error::EmptyMatrix);
        }
        if values.len() != rows * dim {
            return Err(Error::ShapeMismatch {
                expected: (rows, dim),
                found: (values.len() / dim, dim),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(Self { rows, dim, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyMatrix)?.as_ref().len();
        let mut values = Vec::with_capacity(rows.len() * first);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != first {
                return Err(Error::RaggedRows {
                    row: i,
                    expected: first,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), first, values)
    }

    pub fn zeros(rows: usize, dim: usize) -> Result<Self> {
        Self::new(rows, dim, alloc::vec![0.0; rows * dim])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// New matrix whose row `i` is `self.row(order[i])`.
    pub fn select_rows(&self, order: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(order.len() * self.dim);
        for &i in order {
            if i >= self.rows {
                return Err(Error::InvalidPermutation { len: self.rows });
            }
            values.extend_from_slice(self.row(i));
        }
        Self::new(order.len(), self.dim, values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DistanceMetricKind {
    Euclidean,
    Cosine,
    Cityblock,
}

impl DistanceMetricKind {
    pub const ALL: [DistanceMetricKind; 3] = [
        DistanceMetricKind::Euclidean,
        DistanceMetricKind::Cosine,
        DistanceMetricKind::Cityblock,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistanceMetricKind::Euclidean => "euclidean",
            DistanceMetricKind::Cosine => "cosine",
            DistanceMetricKind::Cityblock => "cityblock",
        }
    }

    /// Distance between two equally long rows, accumulated in `f64`.
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            DistanceMetricKind::Euclidean => libm::sqrt(lane_sum(a, b, |x, y| (x - y) * (x - y))),
            DistanceMetricKind::Cityblock => lane_sum(a, b, |x, y| libm::fabs(x - y)),
            DistanceMetricKind::Cosine => {
                let dot = lane_sum(a, b, |x, y| x * y);
                let na = lane_sum(a, a, |x, y| x * y);
                let nb = lane_sum(b, b, |x, y| x * y);
                match (na == 0.0, nb == 0.0) {
                    (true, true) => 0.0,
                    (true, false) | (false, true) => 1.0,
                    // sqrt(na * nb) == na whenever na == nb, so identical rows give exactly 0
                    (false, false) => (1.0 - dot / libm::sqrt(na * nb)).clamp(0.0, 2.0),
                }
            }
        }
    }
}

impl fmt::Display for DistanceMetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceMetricKind {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        match s {
            "euclidean" => Ok(DistanceMetricKind::Euclidean),
            "cosine" => Ok(DistanceMetricKind::Cosine),
            "cityblock" | "manhattan" => Ok(DistanceMetricKind::Cityblock),
            _ => Err(UnknownVariant),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrecisionMode {
    Double,
    /// Computed in `f64`, then rounded to the nearest `f32`.
    EmulatedSingle,
}

impl PrecisionMode {
    pub fn name(self) -> &'static str {
        match self {
            PrecisionMode::Double => "double",
            PrecisionMode::EmulatedSingle => "single",
        }
    }

    #[inline]
    pub fn quantize(self, d: f64) -> f64 {
        match self {
            PrecisionMode::Double => d,
            PrecisionMode::EmulatedSingle => d as f32 as f64,
        }
    }
}

impl fmt::Display for PrecisionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PrecisionMode {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        match s {
            "double" | "f64" => Ok(PrecisionMode::Double),
            "single" | "f32" | "emulated-single" => Ok(PrecisionMode::EmulatedSingle),
            _ => Err(UnknownVariant),
        }
    }
}

/// Returned when parsing an unknown enumeration name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnknownVariant;

impl fmt::Display for UnknownVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("unknown variant")
    }
}

// Four fixed lanes combined in a fixed order. Keeps the dependency chain
// short without making the result depend on anything but the inputs.
#[inline]
fn lane_sum(a: &[f64], b: &[f64], term: impl Fn(f64, f64) -> f64) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += term(a[i], b[i]);
        acc[1] += term(a[i + 1], b[i + 1]);
        acc[2] += term(a[i + 2], b[i + 2]);
        acc[3] += term(a[i + 3], b[i + 3]);
    }
    for i in chunks * 4..a.len() {
        acc[i - chunks * 4] += term(a[i], b[i]);
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

/// Q x K matrix of non-negative finite distances, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        if values.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: (rows, cols),
                found: (values.len() / cols, cols),
            });
        }
        for (pos, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: pos / cols,
                    col: pos % cols,
                });
            }
            if *v < 0.0 {
                return Err(Error::NegativeDistance {
                    row: pos / cols,
                    col: pos % cols,
                });
            }
        }
        // -0.0 and 0.0 compare equal but differ bitwise; store one zero.
        let values = values.into_iter().map(|v| v + 0.0).collect();
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyMatrix)?.as_ref().len();
        let mut values = Vec::with_capacity(rows.len() * first);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != first {
                return Err(Error::RaggedRows {
                    row: i,
                    expected: first,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), first, values)
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

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, q: usize) -> &[f64] {
        &self.values[q * self.cols..(q + 1) * self.cols]
    }

    pub fn get(&self, q: usize, k: usize) -> f64 {
        self.values[q * self.cols + k]
    }
}

/// Distance from every query row to every database row.
pub fn pairwise_distances(
    queries: &EmbeddingMatrix,
    database: &EmbeddingMatrix,
    metric: DistanceMetricKind,
    precision: PrecisionMode,
) -> Result<DistanceMatrix> {
    if queries.dim() != database.dim() {
        return Err(Error::DimensionMismatch {
            queries: queries.dim(),
            database: database.dim(),
        });
    }
    let mut values = Vec::with_capacity(queries.rows() * database.rows());
    for q in 0..queries.rows() {
        let qr = queries.row(q);
        for k in 0..database.rows() {
            values.push(precision.quantize(metric.distance(qr, database.row(k))));
        }
    }
    DistanceMatrix::new(queries.rows(), database.rows(), values)
}

/// `pairwise_distances(e, e, ..)` computed over the upper triangle only.
///
/// All three metrics are exactly symmetric in floating point, so the
/// mirrored result is bit-identical to the full computation.
pub fn self_distances(
    embeddings: &EmbeddingMatrix,
    metric: DistanceMetricKind,
    precision: PrecisionMode,
) -> Result<DistanceMatrix> {
    let n = embeddings.rows();
    let mut values = alloc::vec![0.0; n * n];
    for i in 0..n {
        let a = embeddings.row(i);
        for j in i..n {
            let d = precision.quantize(metric.distance(a, embeddings.row(j)));
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    DistanceMatrix::new(n, n, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn single(metric: DistanceMetricKind, a: &[f64], b: &[f64]) -> f64 {
        let q = EmbeddingMatrix::from_rows(&[a]).unwrap();
        let d = EmbeddingMatrix::from_rows(&[b]).unwrap();
        pairwise_distances(&q, &d, metric, PrecisionMode::Double)
            .unwrap()
            .get(0, 0)
    }

    #[test]
    fn euclidean_three_four_five() {
        assert_eq!(
            single(DistanceMetricKind::Euclidean, &[0.0, 0.0], &[3.0, 4.0]),
            5.0
        );
    }

    #[test]
    fn cityblock_sum_of_abs() {
        assert_eq!(
            single(DistanceMetricKind::Cityblock, &[1.0, 2.0], &[3.0, 1.0]),
            3.0
        );
    }

    #[test]
    fn cosine_identity_and_zero_conventions() {
        let v = [0.3, -1.7, 2.2, 1e-3, 5.0];
        assert_eq!(single(DistanceMetricKind::Cosine, &v, &v), 0.0);
        assert_eq!(single(DistanceMetricKind::Cosine, &[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert_eq!(single(DistanceMetricKind::Cosine, &[0.0, 0.0], &[1.0, 2.0]), 1.0);
        assert_eq!(single(DistanceMetricKind::Cosine, &[1.0, 2.0], &[0.0, 0.0]), 1.0);
        assert_eq!(single(DistanceMetricKind::Cosine, &[1.0, 0.0], &[-1.0, 0.0]), 2.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let q = EmbeddingMatrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let d = EmbeddingMatrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(
            pairwise_distances(&q, &d, DistanceMetricKind::Euclidean, PrecisionMode::Double),
            Err(Error::DimensionMismatch {
                queries: 2,
                database: 3
            })
        );
    }

    #[test]
    fn non_finite_embedding_rejected() {
        assert_eq!(
            EmbeddingMatrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite { row: 0, col: 1 })
        );
        assert!(EmbeddingMatrix::new(0, 2, vec![]).is_err());
        assert!(EmbeddingMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn emulated_single_rounds_to_f32() {
        let q = EmbeddingMatrix::from_rows(&[[0.0]]).unwrap();
        let d = EmbeddingMatrix::from_rows(&[[0.1]]).unwrap();
        let m = pairwise_distances(
            &q,
            &d,
            DistanceMetricKind::Cityblock,
            PrecisionMode::EmulatedSingle,
        )
        .unwrap();
        assert_eq!(m.get(0, 0), 0.1f32 as f64);
        assert_ne!(m.get(0, 0), 0.1);
    }

    #[test]
    fn self_distances_match_full_computation() {
        let e = EmbeddingMatrix::from_rows(&[
            [0.1, 0.7, -0.3, 2.0, 0.5],
            [1.1, -0.2, 0.0, 0.3, 0.9],
            [0.0, 0.0, 0.0, 0.0, 0.0],
            [0.4, 0.4, 0.4, 0.4, 0.4],
        ])
        .unwrap();
        for metric in DistanceMetricKind::ALL {
            for precision in [PrecisionMode::Double, PrecisionMode::EmulatedSingle] {
                let full = pairwise_distances(&e, &e, metric, precision).unwrap();
                let half = self_distances(&e, metric, precision).unwrap();
                assert_eq!(full, half);
                for i in 0..4 {
                    assert_eq!(full.get(i, i), 0.0, "{metric} diagonal");
                }
            }
        }
    }

    #[test]
    fn distance_matrix_validates_entries() {
        assert_eq!(
            DistanceMatrix::new(1, 2, vec![0.1, -0.1]),
            Err(Error::NegativeDistance { row: 0, col: 1 })
        );
        let m = DistanceMatrix::new(1, 1, vec![-0.0]).unwrap();
        assert_eq!(m.get(0, 0).to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn parse_names() {
        assert_eq!("cosine".parse(), Ok(DistanceMetricKind::Cosine));
        assert_eq!("single".parse(), Ok(PrecisionMode::EmulatedSingle));
        assert!("hamming".parse::<DistanceMetricKind>().is_err());
    }
}
