//! Expected mAP under uniform resolution of equidistant runs.
//!
//! A ranked row splits into maximal runs of bitwise-equal distance. A run of
//! length `l` holding `m` relevant items, preceded by `k` items of which `n`
//! are relevant, contributes `Σ_j (n + j) / (k + p_j)` to the AP numerator,
//! where `p_j` is the in-run position of its `j`-th relevant item. Neither
//! `n` nor `k` depend on how other runs are resolved, so by linearity the
//! expected AP is the sum of per-run expectations. Each run expectation is
//! enumerated over all `C(l, m)` placements when that is affordable and
//! estimated by seeded sampling otherwise.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;

use crate::distances::DistanceMatrix;
use crate::error::{Error, Result};
use crate::ranking::RelevanceMatrix;
use crate::reduce::sorted_mean;
use crate::seed::{derive_seed, rng};

/// One maximal group of database items at the same distance from a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquidistantRun {
    pub query_index: usize,
    /// Items ranked strictly before the run (`k`).
    pub retrieved_before: usize,
    /// Relevant items ranked strictly before the run (`n`).
    pub relevant_before: usize,
    /// Run length (`l`).
    pub len: usize,
    /// Relevant items inside the run (`m`).
    pub relevant_within: usize,
    pub distance: f64,
}

impl EquidistantRun {
    /// Only runs with both relevant and non-relevant members are ambiguous.
    pub fn is_mixed(&self) -> bool {
        self.relevant_within > 0 && self.relevant_within < self.len
    }

    /// Range `[n / (k + l − m), (n + m) / (k + m)]` containing every precision
    /// value a relevant item of a mixed run can realize.
    pub fn precision_bounds(&self) -> Option<(f64, f64)> {
        if !self.is_mixed() {
            return None;
        }
        let (n, k, l, m) = self.nklm();
        Some((n as f64 / (k + l - m) as f64, (n + m) as f64 / (k + m) as f64))
    }

    fn nklm(&self) -> (usize, usize, usize, usize) {
        (
            self.relevant_before,
            self.retrieved_before,
            self.len,
            self.relevant_within,
        )
    }

    /// Precision of the `j`-th relevant item (1-based) at in-run position `p`.
    #[inline]
    fn precision(&self, j: usize, p: usize) -> f64 {
        (self.relevant_before + j) as f64 / (self.retrieved_before + p) as f64
    }
}

/// Groups a row (in any order) into runs of exactly equal distance, ordered
/// by distance, each annotated with its `(n, k, l, m)` context.
pub fn extract_runs(query_index: usize, distances: &[f64], relevant: &[bool]) -> Vec<EquidistantRun> {
    debug_assert_eq!(distances.len(), relevant.len());
    let mut cells: Vec<(f64, bool)> = distances.iter().copied().zip(relevant.iter().copied()).collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut runs = Vec::new();
    let (mut k, mut n) = (0, 0);
    for group in cells.chunk_by(|a, b| a.0 == b.0) {
        let m = group.iter().filter(|c| c.1).count();
        runs.push(EquidistantRun {
            query_index,
            retrieved_before: k,
            relevant_before: n,
            len: group.len(),
            relevant_within: m,
            distance: group[0].0,
        });
        k += group.len();
        n += m;
    }
    runs
}

/// Runs of every query of a distance/relevance pair, excluded cells removed.
pub fn extract_all_runs(d: &DistanceMatrix, r: &RelevanceMatrix) -> Result<Vec<Vec<EquidistantRun>>> {
    if d.shape() != r.shape() {
        return Err(Error::ShapeMismatch {
            expected: r.shape(),
            found: d.shape(),
        });
    }
    Ok((0..d.rows())
        .map(|q| {
            let (dist, rel): (Vec<f64>, Vec<bool>) = r
                .candidates(q)
                .map(|k| (d.get(q, k), r.is_relevant(q, k)))
                .unzip();
            extract_runs(q, &dist, &rel)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpectationConfig {
    /// Runs with at most this many placements are enumerated exhaustively.
    pub enumeration_limit: u64,
    /// Samples drawn for a run above the enumeration limit.
    pub mc_samples: u64,
    pub seed: u64,
}

impl Default for ExpectationConfig {
    fn default() -> Self {
        Self {
            enumeration_limit: 1_000_000,
            mc_samples: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunExpectation {
    pub value: f64,
    pub exact: bool,
    /// Sampled placements; zero when enumerated.
    pub samples: u64,
}

/// `C(l, m)`, saturating at `u64::MAX`.
pub fn placements(l: usize, m: usize) -> u64 {
    let m = m.min(l - m) as u128;
    let mut c: u128 = 1;
    for i in 0..m {
        c = c * (l as u128 - i) / (i + 1);
        if c > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    c as u64
}

/// Expected `Σ_j (n + j) / (k + p_j)` over uniform placements of the run's
/// relevant items.
///
/// The sampling stream is seeded from `(config.seed, n, k, l, m)`, so two
/// runs with the same context always receive the same estimate.
pub fn run_expected_contribution(run: &EquidistantRun, config: &ExpectationConfig) -> RunExpectation {
    let (_, _, l, m) = run.nklm();
    if m == 0 {
        return RunExpectation {
            value: 0.0,
            exact: true,
            samples: 0,
        };
    }
    if m == l {
        let value = (1..=m).fold(0.0, |acc, j| acc + run.precision(j, j));
        return RunExpectation {
            value,
            exact: true,
            samples: 0,
        };
    }
    if placements(l, m) <= config.enumeration_limit {
        RunExpectation {
            value: enumerate_run(run),
            exact: true,
            samples: 0,
        }
    } else {
        let samples = config.mc_samples.max(1);
        RunExpectation {
            value: sample_run(run, samples, config.seed),
            exact: false,
            samples,
        }
    }
}

fn enumerate_run(run: &EquidistantRun) -> f64 {
    let (_, _, l, m) = run.nklm();
    // positions[j] is the 0-based slot of the (j+1)-th relevant item
    let mut positions: Vec<usize> = (0..m).collect();
    let mut total = 0.0;
    let mut count = 0u64;
    loop {
        total += positions
            .iter()
            .enumerate()
            .fold(0.0, |acc, (j, &p)| acc + run.precision(j + 1, p + 1));
        count += 1;
        // next combination in lexicographic order
        let mut i = m;
        loop {
            if i == 0 {
                return total / count as f64;
            }
            i -= 1;
            if positions[i] < l - m + i {
                break;
            }
        }
        positions[i] += 1;
        for j in i + 1..m {
            positions[j] = positions[j - 1] + 1;
        }
    }
}

fn sample_run(run: &EquidistantRun, samples: u64, seed: u64) -> f64 {
    let (n, k, l, m) = run.nklm();
    let mut gen = rng(derive_seed(seed, &[n as u64, k as u64, l as u64, m as u64]));
    // draw the smaller side of the split, mark it, then scan in rank order
    let relevant_drawn = m <= l - m;
    let draw = if relevant_drawn { m } else { l - m };
    let mut slots: Vec<usize> = (0..l).collect();
    let mut marked = alloc::vec![false; l];
    let mut total = 0.0;
    for _ in 0..samples {
        for i in 0..draw {
            let j = gen.random_range(i..l);
            slots.swap(i, j);
            marked[slots[i]] = true;
        }
        let mut j = 0;
        let mut sum = 0.0;
        for (p, &mk) in marked.iter().enumerate() {
            if mk == relevant_drawn {
                j += 1;
                sum += run.precision(j, p + 1);
            }
        }
        total += sum;
        for &s in &slots[..draw] {
            marked[s] = false;
        }
    }
    total / samples as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationResult {
    pub expected_map: f64,
    /// `true` when every mixed run was enumerated exhaustively.
    pub exact: bool,
    pub samples_used: u64,
    pub per_query: Vec<f64>,
}

/// Expected AP of one row of runs. Unambiguous runs add their precision
/// terms one at a time, exactly as plain AP does, so a row without mixed
/// runs reproduces its AP bit for bit.
fn expected_ap(
    runs: &[EquidistantRun],
    config: &ExpectationConfig,
    cache: &mut BTreeMap<(usize, usize, usize, usize), RunExpectation>,
) -> Option<(f64, RunStats)> {
    let mut sum = 0.0;
    let mut total_relevant = 0;
    let mut stats = RunStats::default();
    for run in runs {
        total_relevant += run.relevant_within;
        if run.is_mixed() {
            let e = *cache
                .entry(run.nklm())
                .or_insert_with(|| run_expected_contribution(run, config));
            stats.exact &= e.exact;
            stats.samples += e.samples;
            sum += e.value;
        } else if run.relevant_within == run.len {
            for j in 1..=run.len {
                sum += run.precision(j, j);
            }
        }
    }
    (total_relevant > 0).then(|| (sum / total_relevant as f64, stats))
}

struct RunStats {
    exact: bool,
    samples: u64,
}

impl Default for RunStats {
    fn default() -> Self {
        Self {
            exact: true,
            samples: 0,
        }
    }
}

/// Expected mAP when each equidistant run is resolved uniformly at random.
pub fn expected_map(
    d: &DistanceMatrix,
    r: &RelevanceMatrix,
    config: &ExpectationConfig,
) -> Result<ExpectationResult> {
    let runs = extract_all_runs(d, r)?;
    let mut cache = BTreeMap::new();
    let mut per_query = Vec::with_capacity(runs.len());
    let mut exact = true;
    let mut samples_used = 0;
    for (q, row) in runs.iter().enumerate() {
        let (ap, stats) = expected_ap(row, config, &mut cache).ok_or(Error::NoRelevant { row: q })?;
        exact &= stats.exact;
        samples_used += stats.samples;
        per_query.push(ap);
    }
    Ok(ExpectationResult {
        expected_map: sorted_mean(&per_query),
        exact,
        samples_used,
        per_query,
    })
}
