//! Reference computations for tests.
//!
//! Everything here works on plain vectors and is written independently of
//! `equirank-core`: tie groups are found by a separate scan, placements are
//! enumerated as bitmasks, and the exploit values come from direct formulas.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// AP from relevance flags in rank order. `None` without any relevant item.
pub fn average_precision(hits: &[bool]) -> Option<f64> {
    let mut found = 0usize;
    let mut sum = 0.0;
    for (rank0, &h) in hits.iter().enumerate() {
        if h {
            found += 1;
            sum += found as f64 / (rank0 + 1) as f64;
        }
    }
    (found > 0).then(|| sum / found as f64)
}

/// Mean with ascending-sorted summation.
pub fn sorted_mean(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut s = 0.0;
    for x in &v {
        s += x;
    }
    s / v.len() as f64
}

/// Summary of mAP over every joint resolution of the mixed tie groups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Enumeration {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub resolutions: u64,
}

/// (len, relevant count) of each exact-equality group, in distance order.
fn groups(distances: &[f64], relevant: &[bool]) -> Vec<(usize, usize)> {
    let mut idx: Vec<usize> = (0..distances.len()).collect();
    idx.sort_by(|&a, &b| distances[a].partial_cmp(&distances[b]).unwrap());
    let mut out: Vec<(usize, usize)> = Vec::new();
    let mut last: Option<f64> = None;
    for i in idx {
        if last == Some(distances[i]) {
            let g = out.last_mut().unwrap();
            g.0 += 1;
            g.1 += usize::from(relevant[i]);
        } else {
            out.push((1, usize::from(relevant[i])));
        }
        last = Some(distances[i]);
    }
    out
}

/// Enumerates every joint arrangement of relevant items inside mixed tie
/// groups across all queries and summarizes the resulting mAP.
///
/// Arrangements are counted as placements (which slots hold relevant
/// items); each placement stands for the same number of permutations, so
/// the mean over placements equals the mean over permutations. Returns
/// `None` when the joint count exceeds `limit` or a group exceeds 20 items.
pub fn enumerate_tie_resolutions(
    distances: &[Vec<f64>],
    relevant: &[Vec<bool>],
    limit: u64,
) -> Option<Enumeration> {
    let rows: Vec<Vec<(usize, usize)>> = distances
        .iter()
        .zip(relevant)
        .map(|(d, r)| groups(d, r))
        .collect();
    // (row, group) -> list of masks
    let mut mixed: Vec<(usize, usize, Vec<u32>)> = Vec::new();
    let mut total: u64 = 1;
    for (q, row) in rows.iter().enumerate() {
        for (g, &(len, m)) in row.iter().enumerate() {
            if m > 0 && m < len {
                if len > 20 {
                    return None;
                }
                let masks: Vec<u32> = (0u32..1 << len)
                    .filter(|mask| mask.count_ones() as usize == m)
                    .collect();
                total = total.checked_mul(masks.len() as u64)?;
                if total > limit {
                    return None;
                }
                mixed.push((q, g, masks));
            }
        }
    }
    let mut choice = vec![0usize; mixed.len()];
    let mut sum = 0.0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut count = 0u64;
    loop {
        let aps: Vec<f64> = rows
            .iter()
            .enumerate()
            .map(|(q, row)| {
                let mut hits = Vec::new();
                for (g, &(len, m)) in row.iter().enumerate() {
                    if m > 0 && m < len {
                        let slot = mixed.iter().position(|x| x.0 == q && x.1 == g).unwrap();
                        let mask = mixed[slot].2[choice[slot]];
                        hits.extend((0..len).map(|b| mask & (1 << b) != 0));
                    } else {
                        hits.extend(std::iter::repeat_n(m == len, len));
                    }
                }
                average_precision(&hits).expect("row without relevant items")
            })
            .collect();
        let map = sorted_mean(&aps);
        sum += map;
        min = min.min(map);
        max = max.max(map);
        count += 1;
        // odometer
        let mut i = 0;
        loop {
            if i == choice.len() {
                return Some(Enumeration {
                    mean: sum / count as f64,
                    min,
                    max,
                    resolutions: count,
                });
            }
            choice[i] += 1;
            if choice[i] < mixed[i].2.len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// Stable-sort mAP of the all-zero system with class-contiguous blocks:
/// a query in block `b` sees its `P − 1` relevant items at ranks
/// `P·b + 1 ..= P·b + P − 1`.
pub fn contiguous_blocks_map(classes: usize, per_class: usize) -> f64 {
    let p = per_class;
    let total: f64 = (0..classes)
        .map(|b| (1..p).map(|i| i as f64 / (p * b + i) as f64).sum::<f64>() / (p - 1) as f64)
        .sum();
    total / classes as f64
}

/// Stable-sort mAP of the all-zero system with round-robin order: sample `t`
/// has class `t mod C`; relevant item `t` sits at rank `t + 1` before the
/// query position and at rank `t` after it.
pub fn round_robin_map(classes: usize, per_class: usize) -> f64 {
    let n = classes * per_class;
    let mut total = 0.0;
    for p in 0..n {
        let c = p % classes;
        let mut found = 0;
        let mut s = 0.0;
        for t in (c..n).step_by(classes) {
            if t == p {
                continue;
            }
            found += 1;
            let rank = if t < p { t + 1 } else { t };
            s += found as f64 / rank as f64;
        }
        total += s / found as f64;
    }
    total / n as f64
}

/// mAP⁻ of the all-zero system: every non-relevant item ranked first.
pub fn all_zero_map_minus(classes: usize, per_class: usize) -> f64 {
    let n = classes * per_class;
    let p = per_class;
    (1..p).map(|i| i as f64 / (n - p + i) as f64).sum::<f64>() / (p - 1) as f64
}

/// Random distance rows on a coarse grid (so ties are frequent) with random
/// relevance, every row holding at least one relevant item.
pub fn random_tied_instance(
    seed: u64,
    max_rows: usize,
    max_cols: usize,
    levels: u32,
) -> (Vec<Vec<f64>>, Vec<Vec<bool>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = rng.random_range(1..=max_rows);
    let cols = rng.random_range(1..=max_cols);
    let density = rng.random_range(0.1..0.9);
    let mut d = Vec::with_capacity(rows);
    let mut r = Vec::with_capacity(rows);
    for _ in 0..rows {
        d.push(
            (0..cols)
                .map(|_| rng.random_range(0..levels) as f64 / 100.0)
                .collect::<Vec<f64>>(),
        );
        let mut rel: Vec<bool> = (0..cols).map(|_| rng.random_bool(density)).collect();
        if !rel.iter().any(|&x| x) {
            let k = rng.random_range(0..cols);
            rel[k] = true;
        }
        r.push(rel);
    }
    (d, r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_of_worked_example() {
        let d = vec![vec![0.1, 0.1, 0.2, 0.3, 0.4, 0.4, 0.4, 0.9]];
        let r = vec![vec![true, false, false, false, false, true, false, false]];
        let e = enumerate_tie_resolutions(&d, &r, 1000).unwrap();
        assert_eq!(e.resolutions, 6);
        assert!((e.max - 0.7).abs() < 1e-15);
        assert!((e.min - (0.5 + 2.0 / 7.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn closed_forms_on_toy() {
        // [a,a,b,b] contiguous -> 2/3 ; [a,b,a,b] -> 7/12
        assert!((contiguous_blocks_map(2, 2) - 2.0 / 3.0).abs() < 1e-15);
        assert!((round_robin_map(2, 2) - 7.0 / 12.0).abs() < 1e-15);
        // [a,a,b,b] worst case: relevant last of 3
        assert!((all_zero_map_minus(2, 2) - 1.0 / 3.0).abs() < 1e-15);
    }
}
