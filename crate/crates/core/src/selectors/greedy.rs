use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    argmax, run_budgeted, uniform_index, Method, SelectionBudget, SelectionError, SelectionResult,
    Strategy,
};
use crate::diversity::{squared_distance, MomentAccumulator};
use crate::features::FeatureMatrix;
use crate::manifest::Manifest;

fn check_inputs(features: &FeatureMatrix, manifest: &Manifest) -> Result<(), SelectionError> {
    if manifest.is_empty() {
        return Err(SelectionError::EmptyManifest);
    }
    if features.rows() != manifest.len() {
        return Err(SelectionError::RowMismatch {
            features: features.rows(),
            manifest: manifest.len(),
        });
    }
    Ok(())
}

struct MaxSum<'a> {
    features: &'a FeatureMatrix,
    sq_norms: Vec<f64>,
    moments: MomentAccumulator,
    total: f64,
}

impl Strategy for MaxSum<'_> {
    fn propose(&mut self, pool: &[usize], rng: &mut ChaCha8Rng) -> Option<usize> {
        if pool.is_empty() {
            return None;
        }
        if self.moments.count() == 0 {
            return Some(uniform_index(rng, pool.len()));
        }
        let features = self.features;
        let moments = &self.moments;
        let norms = &self.sq_norms;
        argmax(pool, |i| moments.gain_with_norm(features.row(i), norms[i])).map(|(pos, _)| pos)
    }

    fn accept(&mut self, index: usize) -> Option<f64> {
        let row = self.features.row(index);
        let gain = self.moments.gain_with_norm(row, self.sq_norms[index]);
        self.moments
            .absorb(row)
            .expect("feature rows share the accumulator dimension");
        // V(S ∪ {x}) = V(S) + 2·gain keeps the reported trace monotone.
        self.total += 2.0 * gain;
        Some(self.total)
    }
}

/// Greedy max-sum diversity selection.
///
/// The first record is drawn uniformly at random; each later pick maximizes
/// `Σ_{y∈S} ‖x − y‖²` over the records still in contention. The per-step
/// objective is `V(S)` over ordered pairs.
pub fn select_diversity(
    features: &FeatureMatrix,
    manifest: &Manifest,
    budget: SelectionBudget,
    seed: u64,
) -> Result<SelectionResult, SelectionError> {
    check_inputs(features, manifest)?;
    let sq_norms = features
        .iter_rows()
        .map(|r| r.iter().map(|&v| f64::from(v) * f64::from(v)).sum())
        .collect();
    let strategy = MaxSum {
        features,
        sq_norms,
        moments: MomentAccumulator::new(features.dim()),
        total: 0.0,
    };
    Ok(run_budgeted(
        Method::Diversity,
        manifest,
        budget,
        seed,
        strategy,
    ))
}

struct MaxMin<'a> {
    features: &'a FeatureMatrix,
    // Squared distance from each record to its nearest selected record.
    nearest: Vec<f64>,
    any_selected: bool,
}

impl Strategy for MaxMin<'_> {
    fn propose(&mut self, pool: &[usize], rng: &mut ChaCha8Rng) -> Option<usize> {
        if pool.is_empty() {
            return None;
        }
        if !self.any_selected {
            return Some(uniform_index(rng, pool.len()));
        }
        let nearest = &self.nearest;
        argmax(pool, |i| nearest[i]).map(|(pos, _)| pos)
    }

    fn accept(&mut self, index: usize) -> Option<f64> {
        let gain = if self.any_selected {
            self.nearest[index]
        } else {
            0.0
        };
        let features = self.features;
        let chosen = features.row(index);
        self.nearest
            .par_iter_mut()
            .with_min_len(256)
            .enumerate()
            .for_each(|(i, d)| *d = d.min(squared_distance(chosen, features.row(i))));
        self.any_selected = true;
        Some(gain)
    }
}

/// Farthest-point (k-center style) selection: same loop as
/// [`select_diversity`], but each pick maximizes the squared distance to the
/// nearest selected record. The per-step objective is that distance (zero
/// for the first pick).
pub fn select_farthest_point(
    features: &FeatureMatrix,
    manifest: &Manifest,
    budget: SelectionBudget,
    seed: u64,
) -> Result<SelectionResult, SelectionError> {
    check_inputs(features, manifest)?;
    let strategy = MaxMin {
        features,
        nearest: vec![f64::INFINITY; features.rows()],
        any_selected: false,
    };
    Ok(run_budgeted(
        Method::FarthestPoint,
        manifest,
        budget,
        seed,
        strategy,
    ))
}
