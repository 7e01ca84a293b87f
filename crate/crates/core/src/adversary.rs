//! The all-zero embedding exploit.
//!
//! A system that maps every input to the zero vector makes every distance
//! equal, so whatever mAP an evaluator reports is decided entirely by how
//! its sort treats ties. With a stable sort under leave-one-out evaluation,
//! each query's ranking is the sample order minus itself, and reordering the
//! samples moves the score well above a random embedding. mAP⁻ does not move.

use alloc::string::ToString;
use alloc::vec::Vec;

use rand::Rng;

use crate::bounds::map_bounds;
use crate::distances::{self_distances, DistanceMatrix, DistanceMetricKind, EmbeddingMatrix, PrecisionMode};
use crate::error::{Error, Result};
use crate::expectation::{expected_map, ExpectationConfig, ExpectationResult};
use crate::ranking::{
    average_precision, mean_average_precision, rank_correct, relevance, LabelVector, RelevanceMatrix,
    TiePolicy,
};
use crate::reduce::{sorted_mean, sorted_sum};
use crate::seed::{derive_seed, rng};

/// Labels, the order samples are fed to the evaluator, and the embedding
/// shape the adversary claims. Evaluation is leave-one-out.
#[derive(Debug, Clone, PartialEq)]
pub struct ExploitInstance {
    labels: LabelVector,
    order: Vec<usize>,
    dim: usize,
    metric: DistanceMetricKind,
}

impl ExploitInstance {
    pub fn new(labels: LabelVector, order: Vec<usize>, dim: usize) -> Result<Self> {
        check_classes(&labels)?;
        check_permutation(&order, labels.len())?;
        if dim == 0 {
            return Err(Error::EmptyMatrix);
        }
        Ok(Self {
            labels,
            order,
            dim,
            metric: DistanceMetricKind::Euclidean,
        })
    }

    /// `classes` classes of `per_class` samples each, in class-contiguous order.
    pub fn balanced(classes: usize, per_class: usize, dim: usize) -> Result<Self> {
        let labels = balanced_labels(classes, per_class);
        let order = (0..labels.len()).collect();
        Self::new(labels, order, dim)
    }

    pub fn with_order(mut self, order: Vec<usize>) -> Result<Self> {
        check_permutation(&order, self.labels.len())?;
        self.order = order;
        Ok(self)
    }

    pub fn with_metric(mut self, metric: DistanceMetricKind) -> Self {
        self.metric = metric;
        self
    }

    pub fn labels(&self) -> &LabelVector {
        &self.labels
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> DistanceMetricKind {
        self.metric
    }

    /// Labels in evaluation order.
    pub fn ordered_labels(&self) -> LabelVector {
        self.labels.select(&self.order)
    }

    /// Distance and leave-one-out relevance matrices of the all-zero system.
    pub fn matrices(&self) -> Result<(DistanceMatrix, RelevanceMatrix)> {
        let n = self.labels.len();
        let embeddings = EmbeddingMatrix::zeros(n, self.dim)?;
        let d = self_distances(&embeddings, self.metric, PrecisionMode::Double)?;
        let labels = self.ordered_labels();
        let identity: Vec<usize> = (0..n).collect();
        let r = relevance(&labels, &labels, Some(&identity))?;
        Ok((d, r))
    }
}

/// Labels `c0, c0, …, c1, …` for `classes` blocks of `per_class`.
pub fn balanced_labels(classes: usize, per_class: usize) -> LabelVector {
    LabelVector::new((0..classes).flat_map(|c| core::iter::repeat_n(alloc::format!("c{c}"), per_class)))
}

fn check_classes(labels: &LabelVector) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::EmptyLabels);
    }
    match labels.class_sizes().into_iter().find(|&(_, n)| n < 2) {
        Some((label, _)) => Err(Error::SingletonClass {
            label: label.to_string(),
        }),
        None => Ok(()),
    }
}

fn check_permutation(order: &[usize], len: usize) -> Result<()> {
    let mut seen = alloc::vec![false; len];
    if order.len() != len {
        return Err(Error::InvalidPermutation { len });
    }
    for &i in order {
        if i >= len || core::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidPermutation { len });
        }
    }
    Ok(())
}

/// Runs the full pipeline on the all-zero embeddings in the instance order.
pub fn evaluate_with_order(instance: &ExploitInstance, policy: TiePolicy) -> Result<f64> {
    let (d, r) = instance.matrices()?;
    mean_average_precision(&rank_correct(&d, &r, policy)?)
}

/// Measured mAP of the all-zero system under the stable tie policy, from
/// class ids in evaluation order. Equal to [`evaluate_with_order`] with
/// [`TiePolicy::StableByIndex`] bit for bit, without building the matrices.
pub fn stable_all_zero_map(class_ids: &[usize]) -> Result<f64> {
    let n = class_ids.len();
    let mut hits = Vec::with_capacity(n);
    let mut aps = Vec::with_capacity(n);
    for (p, &c) in class_ids.iter().enumerate() {
        hits.clear();
        hits.extend(
            class_ids
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != p)
                .map(|(_, &o)| o == c),
        );
        aps.push(average_precision(&hits).map_err(|_| Error::NoRelevant { row: p })?);
    }
    Ok(sorted_mean(&aps))
}

fn class_groups(labels: &LabelVector) -> Vec<Vec<usize>> {
    let ids = labels.class_ids();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, &c) in ids.iter().enumerate() {
        if c == groups.len() {
            groups.push(Vec::new());
        }
        groups[c].push(i);
    }
    groups
}

/// Class-contiguous blocks, classes in order of first appearance.
pub fn favorable_order(labels: &LabelVector) -> Vec<usize> {
    class_groups(labels).concat()
}

/// Round-robin interleaving of the classes.
pub fn unfavorable_order(labels: &LabelVector) -> Vec<usize> {
    let groups = class_groups(labels);
    let longest = groups.iter().map(Vec::len).max().unwrap_or(0);
    (0..longest)
        .flat_map(|i| groups.iter().filter_map(move |g| g.get(i).copied()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub order: Vec<usize>,
    pub measured_map: f64,
    pub start_map: f64,
    pub evaluations: usize,
}

/// Seeded hill climbing over pairwise swaps of the sample order.
///
/// Starts from [`favorable_order`] (maximize) or [`unfavorable_order`]
/// (minimize) and spends at most `budget` candidate evaluations. A swap is
/// kept only when it strictly improves the stable-policy mAP.
pub fn search_order(
    labels: &LabelVector,
    objective: Objective,
    budget: usize,
    seed: u64,
) -> Result<SearchOutcome> {
    check_classes(labels)?;
    let mut order = match objective {
        Objective::Maximize => favorable_order(labels),
        Objective::Minimize => unfavorable_order(labels),
    };
    let ids = labels.class_ids();
    let mut seq: Vec<usize> = order.iter().map(|&i| ids[i]).collect();
    let start_map = stable_all_zero_map(&seq)?;
    let mut best = start_map;
    let n = seq.len();
    let multi_class = seq.iter().any(|&c| c != seq[0]);
    let mut gen = rng(derive_seed(seed, &[objective as u64]));
    let mut evaluations = 0;
    while multi_class && evaluations < budget {
        let i = gen.random_range(0..n);
        let j = gen.random_range(0..n);
        if seq[i] == seq[j] {
            continue;
        }
        seq.swap(i, j);
        let candidate = stable_all_zero_map(&seq)?;
        evaluations += 1;
        let better = match objective {
            Objective::Maximize => candidate > best,
            Objective::Minimize => candidate < best,
        };
        if better {
            best = candidate;
            order.swap(i, j);
        } else {
            seq.swap(i, j);
        }
    }
    Ok(SearchOutcome {
        order,
        measured_map: best,
        start_map,
        evaluations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSummary {
    pub repetitions: usize,
    pub mean_map: f64,
    /// Population standard deviation over repetitions.
    pub std_map: f64,
    pub seed: u64,
    pub maps: Vec<f64>,
}

/// Leave-one-out mAP of uniform `[0, 1)` embeddings, repeated with
/// independent seeded draws.
pub fn random_baseline(
    labels: &LabelVector,
    dim: usize,
    repetitions: usize,
    seed: u64,
    metric: DistanceMetricKind,
) -> Result<BaselineSummary> {
    if repetitions == 0 {
        return Err(Error::InvalidRepetitions);
    }
    check_classes(labels)?;
    let n = labels.len();
    let identity: Vec<usize> = (0..n).collect();
    let r = relevance(labels, labels, Some(&identity))?;
    let maps = (0..repetitions)
        .map(|rep| {
            let mut gen = rng(derive_seed(seed, &[rep as u64]));
            let values = (0..n * dim).map(|_| gen.random::<f64>()).collect();
            let e = EmbeddingMatrix::new(n, dim, values)?;
            let d = self_distances(&e, metric, PrecisionMode::Double)?;
            mean_average_precision(&rank_correct(&d, &r, TiePolicy::StableByIndex)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean_map = sorted_mean(&maps);
    let squares: Vec<f64> = maps.iter().map(|m| (m - mean_map) * (m - mean_map)).collect();
    let std_map = libm::sqrt(sorted_sum(&squares) / repetitions as f64);
    Ok(BaselineSummary {
        repetitions,
        mean_map,
        std_map,
        seed,
        maps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExploitReportConfig {
    pub expectation: ExpectationConfig,
    /// Zero skips the random baseline.
    pub baseline_repetitions: usize,
    pub baseline_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExploitReport {
    /// mAP under the stable tie policy for the instance order.
    pub measured_map: f64,
    pub map_minus: f64,
    pub map_plus: f64,
    pub epsilon_used: f64,
    pub expected: ExpectationResult,
    pub baseline: Option<BaselineSummary>,
}

pub fn exploit_report(instance: &ExploitInstance, config: &ExploitReportConfig) -> Result<ExploitReport> {
    let (d, r) = instance.matrices()?;
    let measured_map = mean_average_precision(&rank_correct(&d, &r, TiePolicy::StableByIndex)?)?;
    let bounds = map_bounds(&d, &r, None)?;
    let expected = expected_map(&d, &r, &config.expectation)?;
    let baseline = if config.baseline_repetitions > 0 {
        Some(random_baseline(
            &instance.ordered_labels(),
            instance.dim,
            config.baseline_repetitions,
            config.baseline_seed,
            instance.metric,
        )?)
    } else {
        None
    };
    if !(bounds.map_minus <= measured_map && measured_map <= bounds.map_plus) {
        return Err(Error::Invariant("measured mAP outside [map_minus, map_plus]"));
    }
    Ok(ExploitReport {
        measured_map,
        map_minus: bounds.map_minus,
        map_plus: bounds.map_plus,
        epsilon_used: bounds.epsilon_used,
        expected,
        baseline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toy() -> LabelVector {
        LabelVector::new(["a", "a", "b", "b"])
    }

    #[test]
    fn toy_orders() {
        let inst = ExploitInstance::new(toy(), vec![0, 1, 2, 3], 3).unwrap();
        let map = evaluate_with_order(&inst, TiePolicy::StableByIndex).unwrap();
        assert!((map - 2.0 / 3.0).abs() < 1e-15);

        let inst = inst.with_order(vec![0, 2, 1, 3]).unwrap();
        let map = evaluate_with_order(&inst, TiePolicy::StableByIndex).unwrap();
        assert!((map - 7.0 / 12.0).abs() < 1e-15);
        assert_eq!(evaluate_with_order(&inst, TiePolicy::Favorable).unwrap(), 1.0);
    }

    #[test]
    fn all_metrics_agree_on_zero_embeddings() {
        let inst = ExploitInstance::new(toy(), vec![2, 0, 3, 1], 5).unwrap();
        let reference = evaluate_with_order(&inst, TiePolicy::StableByIndex).unwrap();
        for metric in DistanceMetricKind::ALL {
            let m = evaluate_with_order(&inst.clone().with_metric(metric), TiePolicy::StableByIndex).unwrap();
            assert_eq!(m, reference);
        }
    }

    #[test]
    fn singleton_class_rejected() {
        let labels = LabelVector::new(["a", "a", "b"]);
        assert!(matches!(
            ExploitInstance::new(labels.clone(), vec![0, 1, 2], 2),
            Err(Error::SingletonClass { .. })
        ));
        assert!(search_order(&labels, Objective::Maximize, 5, 0).is_err());
    }

    #[test]
    fn bad_order_rejected() {
        assert!(ExploitInstance::new(toy(), vec![0, 1, 1, 3], 2).is_err());
        assert!(ExploitInstance::new(toy(), vec![0, 1, 2], 2).is_err());
    }

    #[test]
    fn heuristic_orders() {
        let labels = LabelVector::new(["x", "y", "x", "z", "y", "z"]);
        assert_eq!(favorable_order(&labels), vec![0, 2, 1, 4, 3, 5]);
        assert_eq!(unfavorable_order(&labels), vec![0, 1, 3, 2, 4, 5]);
    }

    #[test]
    fn fast_path_matches_pipeline() {
        let labels = balanced_labels(3, 4);
        let inst = ExploitInstance::new(labels.clone(), unfavorable_order(&labels), 2).unwrap();
        let ids = labels.class_ids();
        let seq: Vec<usize> = inst.order().iter().map(|&i| ids[i]).collect();
        assert_eq!(
            stable_all_zero_map(&seq).unwrap().to_bits(),
            evaluate_with_order(&inst, TiePolicy::StableByIndex)
                .unwrap()
                .to_bits()
        );
    }

    #[test]
    fn single_class_is_perfect() {
        let labels = balanced_labels(1, 5);
        for obj in [Objective::Maximize, Objective::Minimize] {
            let s = search_order(&labels, obj, 10, 1).unwrap();
            assert_eq!(s.measured_map, 1.0);
        }
        let b = random_baseline(&labels, 3, 2, 0, DistanceMetricKind::Euclidean).unwrap();
        assert_eq!((b.mean_map, b.std_map), (1.0, 0.0));
    }

    #[test]
    fn zero_budget_returns_start() {
        let labels = balanced_labels(3, 4);
        let s = search_order(&labels, Objective::Maximize, 0, 5).unwrap();
        assert_eq!(s.order, favorable_order(&labels));
        assert_eq!(s.measured_map, s.start_map);
        assert_eq!(s.evaluations, 0);
    }

    #[test]
    fn search_never_regresses() {
        let labels = balanced_labels(4, 5);
        let up = search_order(&labels, Objective::Maximize, 200, 3).unwrap();
        let down = search_order(&labels, Objective::Minimize, 200, 3).unwrap();
        assert!(up.measured_map >= up.start_map);
        assert!(down.measured_map <= down.start_map);
        assert!(up.measured_map >= down.measured_map);
        let ids = labels.class_ids();
        let seq: Vec<usize> = up.order.iter().map(|&i| ids[i]).collect();
        assert_eq!(stable_all_zero_map(&seq).unwrap(), up.measured_map);
    }

    #[test]
    fn one_repetition_has_zero_spread() {
        let labels = balanced_labels(2, 3);
        let b = random_baseline(&labels, 4, 1, 11, DistanceMetricKind::Euclidean).unwrap();
        assert_eq!(b.std_map, 0.0);
        assert!(random_baseline(&labels, 4, 0, 11, DistanceMetricKind::Euclidean).is_err());
    }

    #[test]
    fn report_brackets_measurement() {
        let inst = ExploitInstance::balanced(3, 4, 2).unwrap();
        let rep = exploit_report(&inst, &ExploitReportConfig::default()).unwrap();
        assert_eq!(rep.map_plus, 1.0);
        assert!(rep.map_minus <= rep.measured_map && rep.measured_map <= rep.map_plus);
        assert!(rep.expected.exact);
        let other = exploit_report(
            &inst.clone().with_order(unfavorable_order(inst.labels())).unwrap(),
            &ExploitReportConfig::default(),
        )
        .unwrap();
        assert_eq!(other.map_minus, rep.map_minus);
        assert_eq!(other.map_plus, rep.map_plus);
        assert_ne!(other.measured_map, rep.measured_map);
    }
}
