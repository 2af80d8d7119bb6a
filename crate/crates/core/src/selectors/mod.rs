//! Budget-constrained subset selectors.
//!
//! Every selector runs the same loop: propose a candidate from the pool of
//! records still in contention, add it if the running duration stays within
//! `t_max`, otherwise either stop (the default, which mirrors the reference
//! greedy loop that checks the budget before each insertion) or drop the
//! candidate and propose again.
//!
//! Argmax steps break ties toward the lowest manifest index. Scores within a
//! relative `1e-12` of the step maximum count as tied, so floating-point
//! noise between mathematically equal candidates cannot reorder them. Both
//! the maximum and the lowest tied index are independent of how the scan is
//! split across threads.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`);
//! bounded draws use Lemire's widening-multiply rejection method on
//! `next_u64`, so a seed maps to the same picks on every platform.

mod balance;
mod greedy;
mod random;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::Manifest;

pub use balance::{
    entropy, select_entropy_balance, select_entropy_balance_with, BalanceObjective, BalanceOptions,
    CountTable,
};
pub use greedy::{select_diversity, select_farthest_point};
pub use random::select_random;

/// Scores within this fraction of the step maximum are treated as ties.
pub const TIE_RELATIVE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("manifest has no records")]
    EmptyManifest,
    #[error("feature rows ({features}) do not match manifest records ({manifest})")]
    RowMismatch { features: usize, manifest: usize },
    #[error("duration budget must be positive and finite, got {0}")]
    InvalidBudget(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverflowPolicy {
    /// End selection at the first candidate that would exceed the budget.
    #[default]
    StopOnFirstOverflow,
    /// Drop an oversized candidate from contention and keep going.
    SkipAndContinue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Diversity,
    PhonemeBalance,
    InputBalance,
    Random,
    FarthestPoint,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Diversity => "diversity",
            Method::PhonemeBalance => "phoneme_balance",
            Method::InputBalance => "input_balance",
            Method::Random => "random",
            Method::FarthestPoint => "farthest_point",
        }
    }

    pub fn needs_features(self) -> bool {
        matches!(self, Method::Diversity | Method::FarthestPoint)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionBudget {
    t_max: f64,
    overflow_policy: OverflowPolicy,
}

impl SelectionBudget {
    pub fn new(t_max: f64, overflow_policy: OverflowPolicy) -> Result<Self, SelectionError> {
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(SelectionError::InvalidBudget(t_max));
        }
        Ok(SelectionBudget {
            t_max,
            overflow_policy,
        })
    }

    /// Budget with the default stop-on-first-overflow policy.
    pub fn seconds(t_max: f64) -> Result<Self, SelectionError> {
        Self::new(t_max, OverflowPolicy::default())
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn overflow_policy(&self) -> OverflowPolicy {
        self.overflow_policy
    }
}

/// One accepted pick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub index: usize,
    /// Method objective after the addition; `None` for random selection.
    pub objective: Option<f64>,
    pub cumulative_duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub method: Method,
    pub indices: Vec<usize>,
    pub per_step: Vec<Step>,
    pub seed: u64,
    pub t_max: f64,
    pub overflow_policy: OverflowPolicy,
    pub manifest_fingerprint: String,
}

impl SelectionResult {
    pub fn total_duration(&self) -> f64 {
        self.per_step.last().map_or(0.0, |s| s.cumulative_duration)
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.per_step.last().and_then(|s| s.objective)
    }
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw from `0..n` (Lemire's method). `n` must be positive.
pub fn uniform_index<R: RngCore>(rng: &mut R, n: usize) -> usize {
    assert!(n > 0, "cannot draw from an empty range");
    let bound = n as u64;
    let threshold = bound.wrapping_neg() % bound;
    loop {
        let product = u128::from(rng.next_u64()) * u128::from(bound);
        if (product as u64) >= threshold {
            return (product >> 64) as usize;
        }
    }
}

const PAR_MIN_LEN: usize = 256;

/// Position in `pool` (ascending indices) of the best-scoring candidate,
/// with its score. Deterministic for any thread count.
pub(crate) fn argmax<F>(pool: &[usize], score: F) -> Option<(usize, f64)>
where
    F: Fn(usize) -> f64 + Sync,
{
    if pool.is_empty() {
        return None;
    }
    let scores: Vec<f64> = pool
        .par_iter()
        .with_min_len(PAR_MIN_LEN)
        .map(|&i| score(i))
        .collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let threshold = best - TIE_RELATIVE_TOLERANCE * best.abs();
    scores
        .iter()
        .position(|&s| s >= threshold)
        .map(|pos| (pos, scores[pos]))
}

/// Per-method state driven by [`run_budgeted`].
pub(crate) trait Strategy {
    /// Position in `pool` of the next candidate, or `None` to stop.
    fn propose(&mut self, pool: &[usize], rng: &mut ChaCha8Rng) -> Option<usize>;
    /// Commits `index` and returns the objective after the addition.
    fn accept(&mut self, index: usize) -> Option<f64>;
}

pub(crate) fn run_budgeted<S: Strategy>(
    method: Method,
    manifest: &Manifest,
    budget: SelectionBudget,
    seed: u64,
    mut strategy: S,
) -> SelectionResult {
    let durations = manifest.durations();
    let mut rng = seeded_rng(seed);
    let mut pool: Vec<usize> = (0..durations.len()).collect();
    let mut indices = Vec::new();
    let mut per_step = Vec::new();
    let mut total = 0.0;

    while let Some(pos) = strategy.propose(&pool, &mut rng) {
        let candidate = pool.remove(pos);
        let next_total = total + durations[candidate];
        if next_total <= budget.t_max {
            total = next_total;
            let objective = strategy.accept(candidate);
            indices.push(candidate);
            per_step.push(Step {
                index: candidate,
                objective,
                cumulative_duration: total,
            });
        } else if budget.overflow_policy == OverflowPolicy::StopOnFirstOverflow {
            break;
        }
    }

    SelectionResult {
        method,
        indices,
        per_step,
        seed,
        t_max: budget.t_max,
        overflow_policy: budget.overflow_policy,
        manifest_fingerprint: manifest.fingerprint(),
    }
}
