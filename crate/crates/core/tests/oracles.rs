//! Implementation vs. independent reference computations.

use equirank_core::adversary::{
    balanced_labels, evaluate_with_order, favorable_order, search_order, unfavorable_order, ExploitInstance,
    Objective,
};
use equirank_core::collision::{collision_counts, metric_comparison};
use equirank_core::expectation::{run_expected_contribution, EquidistantRun};
use equirank_core::*;
use equirank_oracle::{
    all_zero_map_minus, contiguous_blocks_map, enumerate_tie_resolutions, random_tied_instance,
    round_robin_map,
};

fn matrices(d: &[Vec<f64>], r: &[Vec<bool>]) -> (DistanceMatrix, RelevanceMatrix) {
    let rows = d.len();
    (
        DistanceMatrix::from_rows(d).unwrap(),
        RelevanceMatrix::new(rows, d[0].len(), r.concat(), vec![None; rows]).unwrap(),
    )
}

#[test]
fn expectation_matches_exhaustive_enumeration() {
    let mut checked = 0;
    for seed in 0..300u64 {
        let (d, r) = random_tied_instance(seed, 4, 8, 3);
        let Some(oracle) = enumerate_tie_resolutions(&d, &r, 100_000) else {
            continue;
        };
        let (dm, rm) = matrices(&d, &r);
        let e = expected_map(&dm, &rm, &ExpectationConfig::default()).unwrap();
        let b = map_bounds(&dm, &rm, None).unwrap();
        assert!(e.exact);
        assert!((e.expected_map - oracle.mean).abs() < 1e-12, "seed {seed}");
        assert_eq!(b.map_minus, oracle.min, "seed {seed}");
        assert_eq!(b.map_plus, oracle.max, "seed {seed}");
        checked += 1;
    }
    assert!(checked > 200);
}

#[test]
fn sampling_converges_to_enumeration() {
    let run = EquidistantRun {
        query_index: 0,
        retrieved_before: 7,
        relevant_before: 2,
        len: 12,
        relevant_within: 5,
        distance: 0.0,
    };
    let exact = run_expected_contribution(&run, &ExpectationConfig::default());
    assert!(exact.exact);
    let errors: Vec<f64> = [1_000u64, 30_000, 1_000_000]
        .iter()
        .map(|&samples| {
            let cfg = ExpectationConfig {
                enumeration_limit: 0,
                mc_samples: samples,
                seed: 2024,
            };
            let est = run_expected_contribution(&run, &cfg);
            assert!(!est.exact);
            (est.value - exact.value).abs()
        })
        .collect();
    assert!(errors[2] < errors[0], "{errors:?}");
    assert!(errors[2] < 2e-3, "{errors:?}");
}

#[test]
fn exploit_orders_match_closed_forms() {
    for (classes, per_class) in [(2, 2), (3, 5), (5, 8)] {
        let labels = balanced_labels(classes, per_class);
        let fav = ExploitInstance::new(labels.clone(), favorable_order(&labels), 4).unwrap();
        let unf = ExploitInstance::new(labels.clone(), unfavorable_order(&labels), 4).unwrap();
        let f = evaluate_with_order(&fav, TiePolicy::StableByIndex).unwrap();
        let u = evaluate_with_order(&unf, TiePolicy::StableByIndex).unwrap();
        assert!((f - contiguous_blocks_map(classes, per_class)).abs() < 1e-12);
        assert!((u - round_robin_map(classes, per_class)).abs() < 1e-12);
        assert_eq!(evaluate_with_order(&fav, TiePolicy::Favorable).unwrap(), 1.0);

        let (d, r) = fav.matrices().unwrap();
        let b = map_bounds(&d, &r, None).unwrap();
        assert_eq!(b.map_plus, 1.0);
        assert!((b.map_minus - all_zero_map_minus(classes, per_class)).abs() < 1e-12);
    }
}

#[test]
fn exploit_is_metric_independent() {
    let labels = balanced_labels(3, 4);
    let base = ExploitInstance::new(labels.clone(), unfavorable_order(&labels), 6).unwrap();
    let values: Vec<f64> = DistanceMetricKind::ALL
        .iter()
        .map(|&m| evaluate_with_order(&base.clone().with_metric(m), TiePolicy::StableByIndex).unwrap())
        .collect();
    assert!(values.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn tie_free_scores_do_not_depend_on_order() {
    // random embeddings are tie-free; permuting the samples only permutes
    // queries and database together
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let labels = balanced_labels(4, 6);
    let n = labels.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..8).map(|_| rng.random::<f64>()).collect())
        .collect();
    let e = EmbeddingMatrix::from_rows(&rows).unwrap();
    let identity: Vec<usize> = (0..n).collect();
    let mut reference = None;
    for s in 0..5u64 {
        let mut order = identity.clone();
        let mut prng = rand_chacha::ChaCha8Rng::seed_from_u64(s);
        for i in (1..n).rev() {
            order.swap(i, prng.random_range(0..=i));
        }
        let ep = e.select_rows(&order).unwrap();
        let lp = labels.select(&order);
        let d = self_distances(&ep, DistanceMetricKind::Euclidean, PrecisionMode::Double).unwrap();
        let r = relevance(&lp, &lp, Some(&identity)).unwrap();
        let map = mean_average_precision(&rank_correct(&d, &r, TiePolicy::StableByIndex).unwrap()).unwrap();
        let b = map_bounds(&d, &r, None).unwrap();
        assert_eq!(b.map_minus, map);
        assert_eq!(b.map_plus, map);
        match reference {
            None => reference = Some(map),
            Some(m) => assert_eq!(m.to_bits(), map.to_bits()),
        }
    }
}

#[test]
fn search_respects_start_and_direction() {
    let labels = balanced_labels(5, 8);
    let up = search_order(&labels, Objective::Maximize, 300, 9).unwrap();
    let down = search_order(&labels, Objective::Minimize, 300, 9).unwrap();
    assert!((up.start_map - contiguous_blocks_map(5, 8)).abs() < 1e-12);
    assert!((down.start_map - round_robin_map(5, 8)).abs() < 1e-12);
    assert!(up.measured_map >= up.start_map);
    assert!(down.measured_map <= down.start_map);
    let inst = ExploitInstance::new(labels.clone(), up.order.clone(), 2).unwrap();
    assert_eq!(
        evaluate_with_order(&inst, TiePolicy::StableByIndex).unwrap(),
        up.measured_map
    );
}

fn one_hot(n: usize, scale: impl Fn(usize) -> f64) -> EmbeddingMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { scale(i) } else { 0.0 }).collect())
        .collect();
    EmbeddingMatrix::from_rows(&rows).unwrap()
}

#[test]
fn one_hot_collisions() {
    let labels = LabelVector::new(["a", "a", "b", "b", "c", "c"]);
    let identity: Vec<usize> = (0..6).collect();
    let r = relevance(&labels, &labels, Some(&identity)).unwrap();

    // unit one-hot rows are all at cityblock distance 2: every row is one tie
    let unit = one_hot(6, |_| 1.0);
    let d = pairwise_distances(&unit, &unit, DistanceMetricKind::Cityblock, PrecisionMode::Double).unwrap();
    assert!((0..6).all(|q| r.candidates(q).all(|k| d.get(q, k) == 2.0)));
    let c = collision_counts(&d, &r, 1e-10).unwrap();
    assert_eq!((c.total_runs, c.mixed_runs, c.colliding_cells), (6, 6, 30));

    // distinct magnitudes give distinct cityblock distances |s_i| + |s_j|
    let scaled = one_hot(6, |i| (1u64 << i) as f64);
    let d = pairwise_distances(
        &scaled,
        &scaled,
        DistanceMetricKind::Cityblock,
        PrecisionMode::Double,
    )
    .unwrap();
    assert_eq!(collision_counts(&d, &r, 1e-10).unwrap().colliding_cells, 0);
}

#[test]
fn zero_embeddings_saturate_every_metric() {
    let labels = balanced_labels(3, 3);
    let identity: Vec<usize> = (0..9).collect();
    let r = relevance(&labels, &labels, Some(&identity)).unwrap();
    let e = EmbeddingMatrix::zeros(9, 4).unwrap();
    let reports = metric_comparison(&e, &e, &r, PrecisionMode::Double, |_| 1e-10).unwrap();
    assert_eq!(reports.len(), 3);
    for rep in &reports {
        assert_eq!(rep.colliding_cells, 9 * 8);
        assert_eq!(rep.total_runs, 9);
        assert_eq!(rep.per_rank_histogram, reports[0].per_rank_histogram);
    }
}

#[test]
fn single_precision_collides_at_least_as_often() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    let labels = balanced_labels(10, 20);
    let identity: Vec<usize> = (0..200).collect();
    let r = relevance(&labels, &labels, Some(&identity)).unwrap();
    let rows: Vec<Vec<f64>> = (0..200)
        .map(|_| (0..16).map(|_| rng.random::<f64>()).collect())
        .collect();
    let e = EmbeddingMatrix::from_rows(&rows).unwrap();
    for t in [1e-12, 1e-10, 1e-8, 1e-6] {
        let single = metric_comparison(&e, &e, &r, PrecisionMode::EmulatedSingle, |_| t).unwrap();
        let double = metric_comparison(&e, &e, &r, PrecisionMode::Double, |_| t).unwrap();
        for (s, d) in single.iter().zip(&double) {
            assert!(s.colliding_cells >= d.colliding_cells, "{:?} at {t}", s.metric);
        }
    }
}

#[test]
fn uniform_embeddings_collide_in_single_precision() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1164);
    let (n, dim) = (1164, 504);
    let values: Vec<f64> = (0..n * dim).map(|_| rng.random::<f64>()).collect();
    let e = EmbeddingMatrix::new(n, dim, values).unwrap();
    let labels = LabelVector::new((0..n).map(|i| format!("w{}", i / 3)));
    let identity: Vec<usize> = (0..n).collect();
    let r = relevance(&labels, &labels, Some(&identity)).unwrap();
    let d = self_distances(&e, DistanceMetricKind::Euclidean, PrecisionMode::EmulatedSingle).unwrap();
    let c = collision_counts(&d, &r, 1e-6).unwrap();
    assert!(c.colliding_cells > 0);
}
