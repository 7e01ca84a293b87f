//! JSON report documents.
//!
//! Reals are written with 17 significant digits in scientific notation so
//! every `f64` survives a round trip through the report unchanged.

use equirank_core::adversary::{BaselineSummary, ExploitReport, SearchOutcome};
use equirank_core::collision::CollisionReport;
use equirank_core::EquidistantRun;
use serde::Serialize;
use serde_json::value::RawValue;

use crate::error::Result;

/// A real number rendered with 17 significant digits.
#[derive(Debug, Clone, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = RawValue::from_string(format_real(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

pub fn format_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_owned()
    }
}

fn reals(xs: &[f64]) -> Vec<Real> {
    xs.iter().copied().map(Real).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreKind {
    #[default]
    MapMinus,
    Map,
    MapPlus,
    Expected,
}

impl ScoreKind {
    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::MapMinus => "map-minus",
            ScoreKind::Map => "map",
            ScoreKind::MapPlus => "map-plus",
            ScoreKind::Expected => "expected",
        }
    }
}

impl std::str::FromStr for ScoreKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "map-minus" => Ok(ScoreKind::MapMinus),
            "map" => Ok(ScoreKind::Map),
            "map-plus" => Ok(ScoreKind::MapPlus),
            "expected" => Ok(ScoreKind::Expected),
            other => Err(format!(
                "unknown score {other:?} (expected map-minus, map, map-plus or expected)"
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PrecisionAtK {
    pub k: usize,
    pub value: Real,
}

#[derive(Debug, Clone, Serialize)]
pub struct CollisionSummary {
    pub metric: Option<&'static str>,
    pub threshold: Real,
    pub total_runs: u64,
    pub mixed_runs: u64,
    pub colliding_cells: u64,
    pub per_rank_histogram: Vec<u64>,
}

impl From<&CollisionReport> for CollisionSummary {
    fn from(c: &CollisionReport) -> Self {
        CollisionSummary {
            metric: c.metric.map(|m| m.name()),
            threshold: Real(c.threshold),
            total_runs: c.total_runs,
            mixed_runs: c.mixed_runs,
            colliding_cells: c.colliding_cells,
            per_rank_histogram: c.per_rank_histogram.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryRow {
    pub query: usize,
    pub label: String,
    pub ap: Real,
    pub ap_minus: Real,
    pub ap_plus: Real,
    pub expected_ap: Real,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub metric: &'static str,
    pub precision: &'static str,
    pub tie_policy: String,
    pub leave_one_out: bool,
    pub queries: usize,
    pub database: usize,
    pub dropped_queries: Vec<usize>,
    pub score_kind: &'static str,
    pub score: Real,
    pub map: Real,
    pub map_minus: Real,
    pub map_plus: Real,
    pub expected_map: Real,
    pub expected_exact: bool,
    pub expected_samples: u64,
    pub epsilon_used: Real,
    pub precision_at_k: Vec<PrecisionAtK>,
    pub collisions: CollisionSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_query: Option<Vec<QueryRow>>,
}

impl EvaluationReport {
    pub fn score_value(kind: ScoreKind, map: f64, minus: f64, plus: f64, expected: f64) -> f64 {
        match kind {
            ScoreKind::MapMinus => minus,
            ScoreKind::Map => map,
            ScoreKind::MapPlus => plus,
            ScoreKind::Expected => expected,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CollisionAuditReport {
    pub precision: &'static str,
    pub queries: usize,
    pub database: usize,
    pub reports: Vec<CollisionSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raster: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineDoc {
    pub metric: &'static str,
    pub samples: usize,
    pub classes: usize,
    pub dim: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub mean_map: Real,
    pub std_map: Real,
    pub maps: Vec<Real>,
}

impl BaselineDoc {
    pub fn new(
        b: &BaselineSummary,
        metric: &'static str,
        samples: usize,
        classes: usize,
        dim: usize,
    ) -> Self {
        BaselineDoc {
            metric,
            samples,
            classes,
            dim,
            repetitions: b.repetitions,
            seed: b.seed,
            mean_map: Real(b.mean_map),
            std_map: Real(b.std_map),
            maps: reals(&b.maps),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchDoc {
    pub objective: &'static str,
    pub budget: usize,
    pub seed: u64,
    pub start_map: Real,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExploitDoc {
    pub metric: &'static str,
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub search: SearchDoc,
    pub measured_map: Real,
    pub map_minus: Real,
    pub map_plus: Real,
    pub expected_map: Real,
    pub expected_exact: bool,
    pub expected_samples: u64,
    pub epsilon_used: Real,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineDoc>,
    pub order: Vec<usize>,
}

#[allow(clippy::too_many_arguments)]
impl ExploitDoc {
    pub fn new(
        report: &ExploitReport,
        search: &SearchOutcome,
        objective: &'static str,
        budget: usize,
        seed: u64,
        metric: &'static str,
        classes: usize,
        per_class: usize,
        dim: usize,
    ) -> Self {
        ExploitDoc {
            metric,
            classes,
            per_class,
            dim,
            search: SearchDoc {
                objective,
                budget,
                seed,
                start_map: Real(search.start_map),
                evaluations: search.evaluations,
            },
            measured_map: Real(report.measured_map),
            map_minus: Real(report.map_minus),
            map_plus: Real(report.map_plus),
            expected_map: Real(report.expected.expected_map),
            expected_exact: report.expected.exact,
            expected_samples: report.expected.samples_used,
            epsilon_used: Real(report.epsilon_used),
            baseline: report
                .baseline
                .as_ref()
                .map(|b| BaselineDoc::new(b, metric, classes * per_class, classes, dim)),
            order: search.order.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRow {
    pub query: usize,
    pub distance: Real,
    pub retrieved_before: usize,
    pub relevant_before: usize,
    pub len: usize,
    pub relevant_within: usize,
    pub mixed: bool,
}

impl From<&EquidistantRun> for RunRow {
    fn from(r: &EquidistantRun) -> Self {
        RunRow {
            query: r.query_index,
            distance: Real(r.distance),
            retrieved_before: r.retrieved_before,
            relevant_before: r.relevant_before,
            len: r.len,
            relevant_within: r.relevant_within,
            mixed: r.is_mixed(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunsDoc {
    pub metric: &'static str,
    pub precision: &'static str,
    pub mixed_only: bool,
    pub runs: Vec<RunRow>,
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json<T: Serialize>(doc: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc)?;
    s.push('\n');
    Ok(s)
}
