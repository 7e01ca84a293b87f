//! The evaluation workflow: embeddings and labels in, one report out.

use std::path::Path;

use equirank_core::collision::collision_counts;
use equirank_core::ranking::average_precisions;
use equirank_core::reduce::sorted_mean;
use equirank_core::{
    expected_map, mean_average_precision, pairwise_distances, per_query_bounds, precision_at_k, rank_correct,
    relevance, self_distances, DistanceMatrix, DistanceMetricKind, EmbeddingMatrix, Error, ExpectationConfig,
    LabelVector, PrecisionMode, RelevanceMatrix, TiePolicy,
};

use crate::error::{CliError, Result};
use crate::io::{load_embeddings, load_labels, EmbeddingFormat};
use crate::report::{CollisionSummary, EvaluationReport, PrecisionAtK, QueryRow, Real, ScoreKind};

#[derive(Debug, Clone)]
pub enum Samples {
    /// Every sample queries all others.
    LeaveOneOut {
        embeddings: EmbeddingMatrix,
        labels: LabelVector,
    },
    Split {
        queries: EmbeddingMatrix,
        query_labels: LabelVector,
        database: EmbeddingMatrix,
        database_labels: LabelVector,
    },
}

#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub samples: Samples,
    pub metric: DistanceMetricKind,
    pub precision: PrecisionMode,
    pub tie_policy: TiePolicy,
}

impl DatasetBundle {
    pub fn leave_one_out(embeddings: EmbeddingMatrix, labels: LabelVector) -> Result<Self> {
        check_count(&embeddings, &labels, "embeddings")?;
        Ok(DatasetBundle {
            samples: Samples::LeaveOneOut { embeddings, labels },
            metric: DistanceMetricKind::Euclidean,
            precision: PrecisionMode::Double,
            tie_policy: TiePolicy::StableByIndex,
        })
    }

    pub fn split(
        queries: EmbeddingMatrix,
        query_labels: LabelVector,
        database: EmbeddingMatrix,
        database_labels: LabelVector,
    ) -> Result<Self> {
        check_count(&queries, &query_labels, "queries")?;
        check_count(&database, &database_labels, "database")?;
        if queries.dim() != database.dim() {
            return Err(Error::DimensionMismatch {
                queries: queries.dim(),
                database: database.dim(),
            }
            .into());
        }
        Ok(DatasetBundle {
            samples: Samples::Split {
                queries,
                query_labels,
                database,
                database_labels,
            },
            metric: DistanceMetricKind::Euclidean,
            precision: PrecisionMode::Double,
            tie_policy: TiePolicy::StableByIndex,
        })
    }

    pub fn load_leave_one_out(embeddings: &Path, labels: &Path, format: EmbeddingFormat) -> Result<Self> {
        Self::leave_one_out(load_embeddings(embeddings, format)?, load_labels(labels)?)
    }

    pub fn load_split(
        queries: (&Path, &Path),
        database: (&Path, &Path),
        format: EmbeddingFormat,
    ) -> Result<Self> {
        Self::split(
            load_embeddings(queries.0, format)?,
            load_labels(queries.1)?,
            load_embeddings(database.0, format)?,
            load_labels(database.1)?,
        )
    }

    pub fn with_metric(mut self, metric: DistanceMetricKind) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_precision(mut self, precision: PrecisionMode) -> Self {
        self.precision = precision;
        self
    }

    pub fn with_tie_policy(mut self, policy: TiePolicy) -> Self {
        self.tie_policy = policy;
        self
    }

    pub fn is_leave_one_out(&self) -> bool {
        matches!(self.samples, Samples::LeaveOneOut { .. })
    }

    pub fn query_labels(&self) -> &LabelVector {
        match &self.samples {
            Samples::LeaveOneOut { labels, .. } => labels,
            Samples::Split { query_labels, .. } => query_labels,
        }
    }

    pub fn query_embeddings(&self) -> &EmbeddingMatrix {
        match &self.samples {
            Samples::LeaveOneOut { embeddings, .. } => embeddings,
            Samples::Split { queries, .. } => queries,
        }
    }

    pub fn database_embeddings(&self) -> &EmbeddingMatrix {
        match &self.samples {
            Samples::LeaveOneOut { embeddings, .. } => embeddings,
            Samples::Split { database, .. } => database,
        }
    }

    /// Distance and relevance matrices. With `drop_singletons`, queries
    /// without any relevant database item are removed and their original
    /// indices returned; otherwise such queries are an error.
    pub fn matrices(&self, drop_singletons: bool) -> Result<Prepared> {
        let (d, qlabels, dblabels, self_map) = match &self.samples {
            Samples::LeaveOneOut { embeddings, labels } => {
                let d = self_distances(embeddings, self.metric, self.precision)?;
                let identity: Vec<usize> = (0..labels.len()).collect();
                (d, labels, labels, Some(identity))
            }
            Samples::Split {
                queries,
                query_labels,
                database,
                database_labels,
            } => (
                pairwise_distances(queries, database, self.metric, self.precision)?,
                query_labels,
                database_labels,
                None,
            ),
        };
        match relevance(qlabels, dblabels, self_map.as_deref()) {
            Ok(r) => Ok(Prepared {
                d,
                r,
                kept: (0..qlabels.len()).collect(),
                dropped: Vec::new(),
            }),
            Err(Error::SingletonQueries { queries }) if drop_singletons => {
                let kept: Vec<usize> = (0..qlabels.len())
                    .filter(|q| queries.binary_search(q).is_err())
                    .collect();
                if kept.is_empty() {
                    return Err(Error::SingletonQueries { queries }.into());
                }
                let rows: Vec<&[f64]> = kept.iter().map(|&q| d.row(q)).collect();
                let d = DistanceMatrix::from_rows(&rows)?;
                let map = self_map.map(|m| kept.iter().map(|&q| m[q]).collect::<Vec<_>>());
                let r = relevance(&qlabels.select(&kept), dblabels, map.as_deref())?;
                Ok(Prepared {
                    d,
                    r,
                    kept,
                    dropped: queries,
                })
            }
            Err(e) => Err(e.into()),
        }
    }
}

fn check_count(e: &EmbeddingMatrix, labels: &LabelVector, what: &str) -> Result<()> {
    if e.rows() != labels.len() {
        return Err(CliError::Usage(format!(
            "{what}: {} embedding rows but {} labels",
            e.rows(),
            labels.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub d: DistanceMatrix,
    pub r: RelevanceMatrix,
    /// Original indices of the queries in `d`.
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct EvaluationConfig {
    pub expectation: ExpectationConfig,
    pub collision_threshold: f64,
    pub ranks: Vec<usize>,
    pub per_query: bool,
    pub score: ScoreKind,
    pub epsilon: Option<f64>,
    pub drop_singletons: bool,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            expectation: ExpectationConfig::default(),
            collision_threshold: 1e-10,
            ranks: vec![1, 5, 10],
            per_query: false,
            score: ScoreKind::MapMinus,
            epsilon: None,
            drop_singletons: false,
        }
    }
}

pub fn run_evaluate(bundle: &DatasetBundle, config: &EvaluationConfig) -> Result<EvaluationReport> {
    if !(config.collision_threshold > 0.0 && config.collision_threshold.is_finite()) {
        return Err(Error::InvalidThreshold(config.collision_threshold).into());
    }
    let Prepared { d, r, kept, dropped } = bundle.matrices(config.drop_singletons)?;
    let c = rank_correct(&d, &r, bundle.tie_policy)?;
    let map = mean_average_precision(&c)?;
    let bounds = per_query_bounds(&d, &r, config.epsilon)?;
    let map_minus = sorted_mean(&bounds.ap_minus);
    let map_plus = sorted_mean(&bounds.ap_plus);
    let expected = expected_map(&d, &r, &config.expectation)?;
    let collisions = collision_counts(&d, &r, config.collision_threshold)?;

    if !(map_minus <= map && map <= map_plus) {
        return Err(Error::Invariant("mAP outside [map_minus, map_plus]").into());
    }
    if !(map_minus <= expected.expected_map && expected.expected_map <= map_plus) {
        return Err(Error::Invariant("expected mAP outside [map_minus, map_plus]").into());
    }
    if bounds.epsilon_used.is_nan() || bounds.epsilon_used <= 0.0 {
        return Err(Error::Invariant("non-positive epsilon").into());
    }

    let shortest = c.rows().iter().map(|row| row.len()).min().unwrap_or(0);
    let precision_at_k = config
        .ranks
        .iter()
        .filter(|&&k| k >= 1 && k <= shortest)
        .map(|&k| {
            Ok(PrecisionAtK {
                k,
                value: Real(sorted_mean(&precision_at_k(&c, k)?)),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let per_query = if config.per_query {
        let aps = average_precisions(&c)?;
        let labels = bundle.query_labels();
        Some(
            kept.iter()
                .enumerate()
                .map(|(i, &q)| QueryRow {
                    query: q,
                    label: labels.get(q).to_owned(),
                    ap: Real(aps[i]),
                    ap_minus: Real(bounds.ap_minus[i]),
                    ap_plus: Real(bounds.ap_plus[i]),
                    expected_ap: Real(expected.per_query[i]),
                })
                .collect(),
        )
    } else {
        None
    };

    let mut summary = CollisionSummary::from(&collisions);
    summary.metric = Some(bundle.metric.name());
    Ok(EvaluationReport {
        metric: bundle.metric.name(),
        precision: bundle.precision.name(),
        tie_policy: bundle.tie_policy.to_string(),
        leave_one_out: bundle.is_leave_one_out(),
        queries: d.rows(),
        database: d.cols(),
        dropped_queries: dropped,
        score_kind: config.score.name(),
        score: Real(EvaluationReport::score_value(
            config.score,
            map,
            map_minus,
            map_plus,
            expected.expected_map,
        )),
        map: Real(map),
        map_minus: Real(map_minus),
        map_plus: Real(map_plus),
        expected_map: Real(expected.expected_map),
        expected_exact: expected.exact,
        expected_samples: expected.samples_used,
        epsilon_used: Real(bounds.epsilon_used),
        precision_at_k,
        collisions: summary,
        per_query,
    })
}
