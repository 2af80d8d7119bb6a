use rand_chacha::ChaCha8Rng;

use super::{
    run_budgeted, uniform_index, Method, SelectionBudget, SelectionError, SelectionResult, Strategy,
};
use crate::manifest::Manifest;

struct Uniform;

impl Strategy for Uniform {
    fn propose(&mut self, pool: &[usize], rng: &mut ChaCha8Rng) -> Option<usize> {
        (!pool.is_empty()).then(|| uniform_index(rng, pool.len()))
    }

    fn accept(&mut self, _index: usize) -> Option<f64> {
        None
    }
}

/// Uniform sampling without replacement until the budget rule triggers.
pub fn select_random(
    manifest: &Manifest,
    budget: SelectionBudget,
    seed: u64,
) -> Result<SelectionResult, SelectionError> {
    if manifest.is_empty() {
        return Err(SelectionError::EmptyManifest);
    }
    Ok(run_budgeted(
        Method::Random,
        manifest,
        budget,
        seed,
        Uniform,
    ))
}
