//! Deterministic ranking metrics for embedding-based retrieval.
//!
//! The pipeline is the usual one: embeddings are turned into a query x
//! database distance matrix, class labels into a binary relevance matrix,
//! and each relevance row is reordered by ascending distance into the
//! *correct matrix* from which precision, recall, AP and mAP follow.
//!
//! Equal distances make that reordering undefined. This crate makes the
//! choice explicit ([`TiePolicy`]) and reports what the choice can cost:
//!
//! - [`bounds`]: the tie-robust bounds mAP⁺ / mAP⁻ obtained by nudging
//!   non-relevant distances by ±ε,
//! - [`expectation`]: the exact expected mAP when every equidistant run is
//!   resolved uniformly at random,
//! - [`collision`]: counting and mapping near-collisions,
//! - [`adversary`]: the all-zero embedding exploit and a random baseline.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod adversary;
pub mod bounds;
pub mod collision;
pub mod distances;
mod error;
pub mod expectation;
pub mod ranking;
pub mod reduce;
mod seed;

pub use bounds::{
    epsilon_select, map_bounds, per_query_bounds, perturbation, MapBounds, PerturbationMatrix, Sign,
};
pub use distances::{
    pairwise_distances, self_distances, DistanceMatrix, DistanceMetricKind, EmbeddingMatrix, PrecisionMode,
};
pub use error::{Error, Result};
pub use expectation::{
    expected_map, extract_runs, run_expected_contribution, EquidistantRun, ExpectationConfig,
    ExpectationResult,
};
pub use ranking::{
    average_precision, mean_average_precision, precision_at_k, precision_recall, rank_correct, relevance,
    CorrectMatrix, LabelVector, PrecisionRecallMatrices, RelevanceMatrix, TiePolicy,
};
pub use seed::derive_seed;
