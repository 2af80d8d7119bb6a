//! Budget-constrained core-set selection for multi-speaker speech corpora.
//!
//! A corpus is described by a line-delimited JSON [`manifest`] and one or
//! more row-aligned binary [`features`] files. The [`selectors`] pick a
//! subset whose total duration stays within a budget, either by greedily
//! maximizing the sum of pairwise squared distances between feature vectors
//! (see [`diversity`]) or by one of the entropy-balance baselines. The
//! [`report`] module scores any subset and compares methods side by side.

pub mod cli;
pub mod diversity;
pub mod features;
pub mod manifest;
pub mod report;
pub mod selectors;

pub use diversity::MomentAccumulator;
pub use features::FeatureMatrix;
pub use manifest::{Manifest, UtteranceRecord};
pub use report::{compare_methods, evaluate_subset, ComparisonTable, SubsetMetrics};
pub use selectors::{
    select_diversity, select_entropy_balance, select_farthest_point, select_random,
    BalanceObjective, Method, OverflowPolicy, SelectionBudget, SelectionResult,
};
