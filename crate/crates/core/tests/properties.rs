use equirank_core::bounds::{has_mixed_ties, rank_perturbed, Sign};
use equirank_core::collision::collision_counts;
use equirank_core::expectation::{extract_all_runs, extract_runs};
use equirank_core::ranking::average_precisions;
use equirank_core::*;
use equirank_oracle::random_tied_instance;
use proptest::prelude::*;

fn matrices(d: &[Vec<f64>], r: &[Vec<bool>]) -> (DistanceMatrix, RelevanceMatrix) {
    let rows = d.len();
    let cols = d[0].len();
    (
        DistanceMatrix::from_rows(d).unwrap(),
        RelevanceMatrix::new(rows, cols, r.concat(), vec![None; rows]).unwrap(),
    )
}

fn embeddings(rows: usize, dim: usize) -> impl Strategy<Value = EmbeddingMatrix> {
    prop::collection::vec(-10.0f64..10.0, rows * dim)
        .prop_map(move |v| EmbeddingMatrix::new(rows, dim, v).unwrap())
}

const POLICIES: [TiePolicy; 4] = [
    TiePolicy::StableByIndex,
    TiePolicy::Favorable,
    TiePolicy::Unfavorable,
    TiePolicy::SeededShuffle(17),
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn self_distances_are_symmetric(e in embeddings(6, 5)) {
        for metric in DistanceMetricKind::ALL {
            let d = pairwise_distances(&e, &e, metric, PrecisionMode::Double).unwrap();
            for i in 0..6 {
                prop_assert_eq!(d.get(i, i), 0.0);
                for j in 0..6 {
                    prop_assert_eq!(d.get(i, j).to_bits(), d.get(j, i).to_bits());
                }
            }
        }
    }

    #[test]
    fn triangle_inequality(e in embeddings(3, 4)) {
        for metric in [DistanceMetricKind::Euclidean, DistanceMetricKind::Cityblock] {
            let d = pairwise_distances(&e, &e, metric, PrecisionMode::Double).unwrap();
            for (a, b, c) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
                prop_assert!(d.get(a, c) <= d.get(a, b) + d.get(b, c) + 1e-12);
            }
        }
    }

    #[test]
    fn cosine_ignores_positive_scale(e in embeddings(4, 6), scale in 0.01f64..100.0) {
        let scaled: Vec<Vec<f64>> = (0..4)
            .map(|i| if i == 0 { e.row(i).iter().map(|v| v * scale).collect() } else { e.row(i).to_vec() })
            .collect();
        let s = EmbeddingMatrix::from_rows(&scaled).unwrap();
        let a = pairwise_distances(&e, &e, DistanceMetricKind::Cosine, PrecisionMode::Double).unwrap();
        let b = pairwise_distances(&s, &e, DistanceMetricKind::Cosine, PrecisionMode::Double).unwrap();
        for k in 0..4 {
            prop_assert!((a.get(0, k) - b.get(0, k)).abs() < 1e-12);
        }
    }

    #[test]
    fn single_precision_never_adds_distinct_values(e in embeddings(8, 3)) {
        for metric in DistanceMetricKind::ALL {
            let dd = pairwise_distances(&e, &e, metric, PrecisionMode::Double).unwrap();
            let ds = pairwise_distances(&e, &e, metric, PrecisionMode::EmulatedSingle).unwrap();
            for q in 0..8 {
                let distinct = |row: &[f64]| {
                    let mut v: Vec<u64> = row.iter().map(|x| x.to_bits()).collect();
                    v.sort();
                    v.dedup();
                    v.len()
                };
                prop_assert!(distinct(ds.row(q)) <= distinct(dd.row(q)));
            }
        }
    }

    #[test]
    fn ranking_invariants(seed in any::<u64>()) {
        let (d, r) = random_tied_instance(seed, 6, 12, 5);
        let (d, r) = matrices(&d, &r);
        for policy in POLICIES {
            let c = rank_correct(&d, &r, policy).unwrap();
            let pr = precision_recall(&c).unwrap();
            let aps = average_precisions(&c).unwrap();
            for (q, &ap) in aps.iter().enumerate() {
                let row = c.row(q);
                // conservation and permutation validity
                prop_assert_eq!(row.relevant_count(), r.relevant_count(q));
                let mut order = row.order().to_vec();
                order.sort();
                prop_assert_eq!(order, (0..d.cols()).collect::<Vec<_>>());
                // precision/recall ranges
                prop_assert!(pr.precision[q].iter().all(|&p| (0.0..=1.0).contains(&p)));
                prop_assert!(pr.recall[q].windows(2).all(|w| w[0] <= w[1]));
                prop_assert_eq!(*pr.recall[q].last().unwrap(), 1.0);
                for (k, &p) in pr.precision[q].iter().enumerate() {
                    let hits = row.hits()[..=k].iter().filter(|&&h| h).count();
                    prop_assert_eq!(p * (k + 1) as f64, hits as f64);
                }
                // AP straight from C equals AP sampled from the Pr matrix
                let sampled: Vec<f64> = row
                    .hits()
                    .iter()
                    .zip(&pr.precision[q])
                    .filter(|(h, _)| **h)
                    .map(|(_, &p)| p)
                    .collect();
                let via_pr = sampled.iter().fold(0.0, |a, b| a + b) / sampled.len() as f64;
                prop_assert_eq!(ap.to_bits(), via_pr.to_bits());
            }
        }
    }

    #[test]
    fn policies_agree_without_ties(seed in any::<u64>()) {
        let (_, r) = random_tied_instance(seed, 5, 10, 5);
        let cols = r[0].len();
        // distinct values per row, descending in index
        let d: Vec<Vec<f64>> = (0..r.len())
            .map(|q| (0..cols).map(|k| (cols - k) as f64 + q as f64 * 0.25).collect())
            .collect();
        let (d, r) = matrices(&d, &r);
        let reference = rank_correct(&d, &r, TiePolicy::StableByIndex).unwrap();
        for policy in POLICIES {
            prop_assert_eq!(&rank_correct(&d, &r, policy).unwrap(), &reference);
        }
        let map = mean_average_precision(&reference).unwrap();
        let b = map_bounds(&d, &r, None).unwrap();
        prop_assert_eq!(b.map_minus, map);
        prop_assert_eq!(b.map_plus, map);
    }

    #[test]
    fn map_is_invariant_to_query_order(seed in any::<u64>(), rot in 0usize..6) {
        let (d, r) = random_tied_instance(seed, 6, 10, 5);
        let (da, ra) = matrices(&d, &r);
        let shift = rot % d.len();
        let mut d2 = d.clone();
        let mut r2 = r.clone();
        d2.rotate_left(shift);
        r2.rotate_left(shift);
        d2.reverse();
        r2.reverse();
        let (db, rb) = matrices(&d2, &r2);
        for policy in [TiePolicy::StableByIndex, TiePolicy::Favorable, TiePolicy::Unfavorable] {
            let a = mean_average_precision(&rank_correct(&da, &ra, policy).unwrap()).unwrap();
            let b = mean_average_precision(&rank_correct(&db, &rb, policy).unwrap()).unwrap();
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn bounds_sandwich_and_determinism(seed in any::<u64>()) {
        let (d, r) = random_tied_instance(seed, 8, 16, 6);
        let (dm, rm) = matrices(&d, &r);
        let b = map_bounds(&dm, &rm, None).unwrap();
        for s in 0..8 {
            let map = mean_average_precision(&rank_correct(&dm, &rm, TiePolicy::SeededShuffle(s)).unwrap()).unwrap();
            prop_assert!(b.map_minus <= map && map <= b.map_plus);
        }
        prop_assert_eq!(b.map_minus == b.map_plus, !has_mixed_ties(&dm, &rm));

        // reverse database columns and query rows
        let d2: Vec<Vec<f64>> = d.iter().rev().map(|row| row.iter().rev().copied().collect()).collect();
        let r2: Vec<Vec<bool>> = r.iter().rev().map(|row| row.iter().rev().copied().collect()).collect();
        let (dm2, rm2) = matrices(&d2, &r2);
        let b2 = map_bounds(&dm2, &rm2, None).unwrap();
        prop_assert_eq!(b.map_minus.to_bits(), b2.map_minus.to_bits());
        prop_assert_eq!(b.map_plus.to_bits(), b2.map_plus.to_bits());
        let e1 = expected_map(&dm, &rm, &ExpectationConfig::default()).unwrap();
        let e2 = expected_map(&dm2, &rm2, &ExpectationConfig::default()).unwrap();
        prop_assert_eq!(e1.expected_map.to_bits(), e2.expected_map.to_bits());
    }

    #[test]
    fn perturbation_preserves_strict_order(seed in any::<u64>()) {
        let (d, r) = random_tied_instance(seed, 4, 12, 8);
        let (dm, rm) = matrices(&d, &r);
        let e = perturbation(&rm, epsilon_select(&dm)).unwrap();
        for sign in [Sign::Plus, Sign::Minus] {
            let vals = e.apply(&dm, sign).unwrap();
            for q in 0..dm.rows() {
                for a in 0..dm.cols() {
                    for b in 0..dm.cols() {
                        if dm.get(q, a) < dm.get(q, b) {
                            prop_assert_eq!(e.compare(&dm, sign, q, a, b), std::cmp::Ordering::Less);
                            prop_assert!(vals[q * dm.cols() + a] < vals[q * dm.cols() + b]);
                        }
                    }
                }
            }
        }
        // plus ranking == favorable policy, minus == unfavorable
        let plus = rank_perturbed(&dm, &rm, Sign::Plus, None).unwrap();
        let fav = rank_correct(&dm, &rm, TiePolicy::Favorable).unwrap();
        for q in 0..dm.rows() {
            prop_assert_eq!(plus.row(q).hits(), fav.row(q).hits());
        }
    }

    #[test]
    fn expectation_is_bounded(seed in any::<u64>()) {
        let (d, r) = random_tied_instance(seed, 6, 30, 4);
        let (dm, rm) = matrices(&d, &r);
        let b = map_bounds(&dm, &rm, None).unwrap();
        let e = expected_map(&dm, &rm, &ExpectationConfig::default()).unwrap();
        prop_assert!(e.exact);
        prop_assert!(b.map_minus <= e.expected_map && e.expected_map <= b.map_plus);
    }

    #[test]
    fn run_precision_bounds(seed in any::<u64>()) {
        let (d, r) = random_tied_instance(seed, 3, 14, 4);
        let (dm, rm) = matrices(&d, &r);
        let fav = rank_correct(&dm, &rm, TiePolicy::Favorable).unwrap();
        let unf = rank_correct(&dm, &rm, TiePolicy::Unfavorable).unwrap();
        for (q, runs) in extract_all_runs(&dm, &rm).unwrap().iter().enumerate() {
            for run in runs.iter().filter(|r| r.is_mixed()) {
                let (lo, hi) = run.precision_bounds().unwrap();
                for c in [&fav, &unf] {
                    let hits = c.row(q).hits();
                    let mut found = run.relevant_before;
                    for (p, &hit) in hits.iter().enumerate().skip(run.retrieved_before).take(run.len) {
                        if hit {
                            found += 1;
                            let prec = found as f64 / (p + 1) as f64;
                            prop_assert!(lo <= prec && prec <= hi);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn pure_runs_add_no_ambiguity(seed in any::<u64>(), extra in 1usize..4, relevant in any::<bool>()) {
        let (d, r) = random_tied_instance(seed, 4, 10, 4);
        // append a pure run beyond every existing distance
        let d2: Vec<Vec<f64>> = d.iter().map(|row| { let mut v = row.clone(); v.extend(std::iter::repeat_n(5.0, extra)); v }).collect();
        let r2: Vec<Vec<bool>> = r.iter().map(|row| { let mut v = row.clone(); v.extend(std::iter::repeat_n(relevant, extra)); v }).collect();
        let (dm, rm) = matrices(&d2, &r2);
        let e = expected_map(&dm, &rm, &ExpectationConfig::default()).unwrap();
        let oracle = equirank_oracle::enumerate_tie_resolutions(&d2, &r2, 100_000);
        if let Some(o) = oracle {
            prop_assert!((e.expected_map - o.mean).abs() < 1e-12);
        }
    }

    #[test]
    fn collisions_grow_with_threshold(seed in any::<u64>()) {
        let (d, r) = random_tied_instance(seed, 5, 20, 40);
        let (dm, rm) = matrices(&d, &r);
        let mut last = 0;
        for t in [1e-12, 1e-10, 1e-8, 1e-6, 1e-2, 0.5] {
            let c = collision_counts(&dm, &rm, t).unwrap();
            prop_assert!(c.colliding_cells >= last);
            prop_assert!(c.mixed_runs <= c.total_runs);
            prop_assert_eq!(c.per_rank_histogram.iter().sum::<u64>(), c.colliding_cells);
            last = c.colliding_cells;
        }
    }

    #[test]
    fn exact_ties_lie_inside_thresholded_runs(seed in any::<u64>(), t in 1e-12f64..1e-1) {
        let (d, r) = random_tied_instance(seed, 1, 20, 10);
        let (dm, rm) = matrices(&d, &r);
        let exact_cells: u64 = extract_runs(0, dm.row(0), rm.row(0))
            .iter()
            .filter(|run| run.len >= 2)
            .map(|run| run.len as u64)
            .sum();
        let map = equirank_core::collision::render_collision_map(&dm, &rm, t).unwrap();
        let runs = extract_runs(0, dm.row(0), rm.row(0));
        for run in runs.iter().filter(|run| run.len >= 2) {
            for p in run.retrieved_before..run.retrieved_before + run.len {
                prop_assert_ne!(map.get(0, p), equirank_core::collision::CellState::NoCollision);
            }
        }
        prop_assert!(collision_counts(&dm, &rm, t).unwrap().colliding_cells >= exact_cells);
    }
}
