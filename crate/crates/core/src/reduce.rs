//! Order-independent reductions.
//!
//! Floating-point addition is not associative, so a mean over queries
//! depends on the order the queries arrive in. Sorting the terms first
//! pins the summation order to the multiset of values.

use alloc::vec::Vec;

/// Sum of `values` after sorting them ascending.
pub fn sorted_sum(values: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().fold(0.0, |acc, v| acc + v)
}

/// Arithmetic mean with a sorted summation; `0.0` for an empty slice.
pub fn sorted_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    sorted_sum(values) / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_ignores_input_order() {
        let a = [1e16, 1.0, -1e16, 3.0, 0.1, 0.2];
        let mut b = a;
        b.reverse();
        assert_eq!(sorted_mean(&a).to_bits(), sorted_mean(&b).to_bits());
    }

    #[test]
    fn empty_mean_is_zero() {
        assert_eq!(sorted_mean(&[]), 0.0);
    }
}
