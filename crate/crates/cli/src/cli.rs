//! Command-line surface.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use equirank_core::adversary::{
    balanced_labels, exploit_report, random_baseline, search_order, ExploitInstance, ExploitReportConfig,
    Objective,
};
use equirank_core::collision::{collision_counts, metric_comparison, render_collision_map};
use equirank_core::expectation::extract_all_runs;
use equirank_core::{DistanceMetricKind, Error, ExpectationConfig, PrecisionMode, TiePolicy};

use crate::error::{CliError, Result};
use crate::io::{load_labels, write_atomic, EmbeddingFormat};
use crate::pipeline::{run_evaluate, DatasetBundle, EvaluationConfig};
use crate::raster::{self, RasterKind};
use crate::report::{
    to_json, BaselineDoc, CollisionAuditReport, CollisionSummary, ExploitDoc, RunRow, RunsDoc, ScoreKind,
};

fn parse_metric(s: &str) -> Result<DistanceMetricKind, String> {
    s.parse()
        .map_err(|_| format!("unknown metric {s:?} (expected euclidean, cosine or cityblock)"))
}

fn parse_precision(s: &str) -> Result<PrecisionMode, String> {
    s.parse()
        .map_err(|_| format!("unknown precision {s:?} (expected double or single)"))
}

fn parse_policy(s: &str) -> Result<TiePolicy, String> {
    s.parse().map_err(|_| {
        format!("unknown tie policy {s:?} (expected stable, favorable, unfavorable or shuffle:SEED)")
    })
}

fn parse_objective(s: &str) -> Result<Objective, String> {
    match s {
        "maximize" | "max" => Ok(Objective::Maximize),
        "minimize" | "min" => Ok(Objective::Minimize),
        _ => Err(format!("unknown objective {s:?} (expected maximize or minimize)")),
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

/// Tie-aware retrieval evaluation of embeddings.
#[derive(Debug, Parser)]
#[command(name = "equirank", version)]
pub struct Cli {
    #[command(flatten)]
    pub shared: Shared,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Shared {
    /// euclidean, cosine or cityblock
    #[arg(long, global = true, default_value = "euclidean", value_parser = parse_metric)]
    pub metric: DistanceMetricKind,
    /// double, or single (results rounded to f32)
    #[arg(long, global = true, default_value = "double", value_parser = parse_precision)]
    pub precision: PrecisionMode,
    /// stable, favorable, unfavorable or shuffle:SEED
    #[arg(long, global = true, default_value = "stable", value_parser = parse_policy)]
    pub tie_policy: TiePolicy,
    /// Compare every sample against all the others.
    #[arg(long, global = true)]
    pub leave_one_out: bool,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Embedding file format: text or binary.
    #[arg(long, global = true, default_value = "text")]
    pub format: EmbeddingFormat,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full evaluation report: mAP, both bounds, expected mAP, collisions.
    Eval(EvalArgs),
    /// Collision audit with optional raster map.
    Collisions(CollisionArgs),
    /// All-zero embedding exploit.
    Exploit(ExploitArgs),
    /// mAP of uniform random embeddings.
    Baseline(BaselineArgs),
    /// Dump the equidistant runs of every query.
    Runs(RunsArgs),
}

#[derive(Debug, Args)]
pub struct Inputs {
    /// Embeddings for --leave-one-out.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Labels for --leave-one-out.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, requires = "query_labels")]
    pub queries: Option<PathBuf>,
    #[arg(long)]
    pub query_labels: Option<PathBuf>,
    #[arg(long, requires = "database_labels")]
    pub database: Option<PathBuf>,
    #[arg(long)]
    pub database_labels: Option<PathBuf>,
    /// Skip queries that have no relevant database item.
    #[arg(long)]
    pub drop_singletons: bool,
}

#[derive(Debug, Args)]
pub struct ExpectationArgs {
    /// Monte-Carlo samples for runs too large to enumerate.
    #[arg(long, default_value_t = 100_000)]
    pub mc_samples: u64,
    /// Largest number of placements enumerated exactly per run.
    #[arg(long, default_value_t = 1_000_000)]
    pub enumeration_limit: u64,
    /// Seed of the Monte-Carlo sampler.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ExpectationArgs {
    fn config(&self) -> ExpectationConfig {
        ExpectationConfig {
            enumeration_limit: self.enumeration_limit,
            mc_samples: self.mc_samples,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub expectation: ExpectationArgs,
    /// Headline score: map-minus, map, map-plus or expected.
    #[arg(long, default_value = "map-minus")]
    pub score: ScoreKind,
    /// Collision threshold of the audit summary.
    #[arg(long, default_value_t = 1e-10, value_parser = parse_positive)]
    pub threshold: f64,
    /// Override the automatic perturbation size.
    #[arg(long, value_parser = parse_positive)]
    pub epsilon: Option<f64>,
    /// Ranks for the precision-at-k table.
    #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
    pub ranks: Vec<usize>,
    /// Include the per-query table.
    #[arg(long)]
    pub per_query: bool,
}

#[derive(Debug, Args)]
pub struct CollisionArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[arg(long, default_value_t = 1e-10, value_parser = parse_positive)]
    pub threshold: f64,
    /// Write the collision map (.ppm or .pgm).
    #[arg(long)]
    pub raster: Option<PathBuf>,
    /// Leave out this many leading queries from the raster.
    #[arg(long, default_value_t = 0)]
    pub crop_rows: usize,
    /// One report per metric instead of only --metric.
    #[arg(long)]
    pub compare_metrics: bool,
}

#[derive(Debug, Args)]
pub struct ExploitArgs {
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    #[arg(long, default_value_t = 1000)]
    pub dim: usize,
    /// maximize or minimize the measured mAP
    #[arg(long, default_value = "maximize", value_parser = parse_objective)]
    pub objective: Objective,
    /// Candidate orders evaluated by the search.
    #[arg(long, default_value_t = 0)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random-embedding repetitions for comparison; 0 skips.
    #[arg(long, default_value_t = 0)]
    pub baseline_reps: usize,
    #[arg(long, default_value_t = 100_000)]
    pub mc_samples: u64,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long, default_value_t = 30)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub dim: usize,
    #[arg(long, default_value_t = 10, conflicts_with = "labels")]
    pub classes: usize,
    #[arg(long, default_value_t = 100, conflicts_with = "labels")]
    pub per_class: usize,
    /// Take the labels from a file instead of --classes/--per-class.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunsArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    /// Only runs holding both relevant and non-relevant items.
    #[arg(long)]
    pub mixed_only: bool,
}

fn bundle(shared: &Shared, inputs: &Inputs) -> Result<DatasetBundle> {
    let b = if shared.leave_one_out {
        if inputs.queries.is_some() || inputs.database.is_some() {
            return Err(CliError::Usage(
                "--leave-one-out takes --embeddings/--labels, not --queries/--database".into(),
            ));
        }
        match (&inputs.embeddings, &inputs.labels) {
            (Some(e), Some(l)) => DatasetBundle::load_leave_one_out(e, l, shared.format)?,
            _ => {
                return Err(CliError::Usage(
                    "--leave-one-out needs --embeddings and --labels".into(),
                ))
            }
        }
    } else {
        match (
            &inputs.queries,
            &inputs.query_labels,
            &inputs.database,
            &inputs.database_labels,
        ) {
            (Some(q), Some(ql), Some(d), Some(dl)) => {
                DatasetBundle::load_split((q, ql), (d, dl), shared.format)?
            }
            _ => {
                return Err(CliError::Usage(
                    "give --queries/--query-labels and --database/--database-labels, \
                     or --embeddings/--labels with --leave-one-out"
                        .into(),
                ))
            }
        }
    };
    Ok(b.with_metric(shared.metric)
        .with_precision(shared.precision)
        .with_tie_policy(shared.tie_policy))
}

fn emit(shared: &Shared, text: &str) -> Result<()> {
    match &shared.output {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let shared = &cli.shared;
    let doc = match &cli.command {
        Command::Eval(args) => {
            let config = EvaluationConfig {
                expectation: args.expectation.config(),
                collision_threshold: args.threshold,
                ranks: args.ranks.clone(),
                per_query: args.per_query,
                score: args.score,
                epsilon: args.epsilon,
                drop_singletons: args.inputs.drop_singletons,
            };
            to_json(&run_evaluate(&bundle(shared, &args.inputs)?, &config)?)?
        }
        Command::Collisions(args) => collisions(shared, args)?,
        Command::Exploit(args) => exploit(shared, args)?,
        Command::Baseline(args) => {
            let labels = match &args.labels {
                Some(path) => load_labels(path)?,
                None => balanced_labels(args.classes, args.per_class),
            };
            let b = random_baseline(&labels, args.dim, args.reps, args.seed, shared.metric)?;
            let classes = labels.class_sizes().len();
            to_json(&BaselineDoc::new(
                &b,
                shared.metric.name(),
                labels.len(),
                classes,
                args.dim,
            ))?
        }
        Command::Runs(args) => {
            let prepared = bundle(shared, &args.inputs)?.matrices(args.inputs.drop_singletons)?;
            let runs = extract_all_runs(&prepared.d, &prepared.r)?
                .into_iter()
                .flatten()
                .filter(|run| !args.mixed_only || run.is_mixed())
                .map(|mut run| {
                    run.query_index = prepared.kept[run.query_index];
                    RunRow::from(&run)
                })
                .collect();
            to_json(&RunsDoc {
                metric: shared.metric.name(),
                precision: shared.precision.name(),
                mixed_only: args.mixed_only,
                runs,
            })?
        }
    };
    emit(shared, &doc)
}

fn collisions(shared: &Shared, args: &CollisionArgs) -> Result<String> {
    let bundle = bundle(shared, &args.inputs)?;
    let prepared = bundle.matrices(args.inputs.drop_singletons)?;
    let reports: Vec<CollisionSummary> = if args.compare_metrics {
        let kept = bundle.query_embeddings().select_rows(&prepared.kept)?;
        metric_comparison(
            &kept,
            bundle.database_embeddings(),
            &prepared.r,
            shared.precision,
            |_| args.threshold,
        )?
        .iter()
        .map(CollisionSummary::from)
        .collect()
    } else {
        let mut s = CollisionSummary::from(&collision_counts(&prepared.d, &prepared.r, args.threshold)?);
        s.metric = Some(shared.metric.name());
        vec![s]
    };
    if let Some(path) = &args.raster {
        let map = render_collision_map(&prepared.d, &prepared.r, args.threshold)?;
        if args.crop_rows >= map.rows() {
            return Err(CliError::Usage(format!(
                "--crop-rows {} leaves no rows of {}",
                args.crop_rows,
                map.rows()
            )));
        }
        let map = map.crop_rows(args.crop_rows);
        write_atomic(path, &raster::encode(&map, RasterKind::from_path(path)))?;
    }
    let (queries, database) = (prepared.d.rows(), prepared.d.cols());
    to_json(&CollisionAuditReport {
        precision: shared.precision.name(),
        queries,
        database,
        reports,
        raster: args.raster.as_ref().map(|p| p.display().to_string()),
    })
}

fn exploit(shared: &Shared, args: &ExploitArgs) -> Result<String> {
    let labels = balanced_labels(args.classes, args.per_class);
    let search = search_order(&labels, args.objective, args.budget, args.seed)?;
    let instance = ExploitInstance::new(labels, search.order.clone(), args.dim)?.with_metric(shared.metric);
    let config = ExploitReportConfig {
        expectation: ExpectationConfig {
            mc_samples: args.mc_samples,
            seed: args.seed,
            ..ExpectationConfig::default()
        },
        baseline_repetitions: args.baseline_reps,
        baseline_seed: args.seed,
    };
    let report = exploit_report(&instance, &config)?;
    if report.measured_map != search.measured_map {
        return Err(Error::Invariant("search and pipeline disagree on the measured mAP").into());
    }
    let objective = match args.objective {
        Objective::Maximize => "maximize",
        Objective::Minimize => "minimize",
    };
    to_json(&ExploitDoc::new(
        &report,
        &search,
        objective,
        args.budget,
        args.seed,
        shared.metric.name(),
        args.classes,
        args.per_class,
        args.dim,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn shared_flags_parse_anywhere() {
        let cli = Cli::try_parse_from([
            "equirank",
            "eval",
            "--leave-one-out",
            "--metric",
            "cosine",
            "--tie-policy",
            "shuffle:4",
            "--precision",
            "single",
            "--embeddings",
            "e.csv",
            "--labels",
            "l.txt",
        ])
        .unwrap();
        assert_eq!(cli.shared.metric, DistanceMetricKind::Cosine);
        assert_eq!(cli.shared.precision, PrecisionMode::EmulatedSingle);
        assert_eq!(cli.shared.tie_policy, TiePolicy::SeededShuffle(4));
        assert!(cli.shared.leave_one_out);
        assert!(Cli::try_parse_from(["equirank", "eval", "--metric", "hamming"]).is_err());
        assert!(Cli::try_parse_from(["equirank", "frobnicate"]).is_err());
    }
}
