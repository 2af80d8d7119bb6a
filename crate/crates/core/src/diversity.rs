//! Sum-of-squared-distances diversity via running moments.
//!
//! For a set `S` of `n` vectors with sum `m` and sum of squared norms `q`,
//!
//! ```text
//! Σ_{y∈S} ‖x − y‖²      = n‖x‖² − 2⟨x, m⟩ + q
//! Σ_{x,y∈S} ‖x − y‖²    = 2(n·q − ‖m‖²)
//! ```
//!
//! The second sum runs over ordered pairs (the diagonal contributes zero), so
//! adding `x` to `S` raises it by exactly twice the first. Both are `O(dim)`
//! given the accumulator, which is what keeps greedy selection linear in the
//! corpus size per step.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DiversityError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no selected vectors to measure distance against")]
    EmptySelection,
}

/// Sufficient statistics of a vector set: count, vector sum and sum of
/// squared norms, all accumulated in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator {
    count: usize,
    sum: Vec<f64>,
    sq_norms: f64,
}

impl MomentAccumulator {
    pub fn new(dim: usize) -> Self {
        MomentAccumulator {
            count: 0,
            sum: vec![0.0; dim],
            sq_norms: 0.0,
        }
    }

    /// Accumulator over every vector yielded by `rows`.
    pub fn from_rows<'a, T, I>(dim: usize, rows: I) -> Result<Self, DiversityError>
    where
        T: Copy + Into<f64> + 'a,
        I: IntoIterator<Item = &'a [T]>,
    {
        let mut acc = MomentAccumulator::new(dim);
        for row in rows {
            acc.absorb(row)?;
        }
        Ok(acc)
    }

    pub fn dim(&self) -> usize {
        self.sum.len()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn sum(&self) -> &[f64] {
        &self.sum
    }

    pub fn sq_norms(&self) -> f64 {
        self.sq_norms
    }

    fn check_dim(&self, found: usize) -> Result<(), DiversityError> {
        if found != self.sum.len() {
            return Err(DiversityError::DimensionMismatch {
                expected: self.sum.len(),
                found,
            });
        }
        Ok(())
    }

    /// Adds `x` to the set.
    pub fn absorb<T: Copy + Into<f64>>(&mut self, x: &[T]) -> Result<(), DiversityError> {
        self.check_dim(x.len())?;
        let mut norm = 0.0;
        for (s, &v) in self.sum.iter_mut().zip(x) {
            let v: f64 = v.into();
            *s += v;
            norm += v * v;
        }
        self.count += 1;
        self.sq_norms += norm;
        Ok(())
    }

    /// `Σ_{y∈S} ‖x − y‖²`. Half the increase of [`diversity_total`] when
    /// `x` is absorbed.
    ///
    /// [`diversity_total`]: MomentAccumulator::diversity_total
    pub fn marginal_gain<T: Copy + Into<f64>>(&self, x: &[T]) -> Result<f64, DiversityError> {
        self.check_dim(x.len())?;
        let (norm, dot) = x
            .iter()
            .zip(&self.sum)
            .fold((0.0, 0.0), |(n, d), (&v, &s)| {
                let v: f64 = v.into();
                (n + v * v, d + v * s)
            });
        Ok(self.gain_from_parts(norm, dot))
    }

    /// Same as [`marginal_gain`](Self::marginal_gain) with `‖x‖²`
    /// precomputed. No dimension check.
    #[inline]
    pub(crate) fn gain_with_norm(&self, x: &[f32], sq_norm: f64) -> f64 {
        self.gain_from_parts(sq_norm, dot_f32_f64(x, &self.sum))
    }

    #[inline]
    fn gain_from_parts(&self, sq_norm: f64, dot: f64) -> f64 {
        // Cancellation near duplicates can push this a hair below zero.
        (self.count as f64 * sq_norm - 2.0 * dot + self.sq_norms).max(0.0)
    }

    /// `V(S) = Σ_{x,y∈S} ‖x − y‖²` over ordered pairs.
    pub fn diversity_total(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let m2: f64 = self.sum.iter().map(|s| s * s).sum();
        (2.0 * (self.count as f64 * self.sq_norms - m2)).max(0.0)
    }
}

/// Dot product with eight independent partial sums, combined in a fixed
/// order so the result does not depend on the caller.
#[inline]
fn dot_f32_f64(x: &[f32], y: &[f64]) -> f64 {
    const LANES: usize = 8;
    let mut acc = [0.0f64; LANES];
    let xs = x.chunks_exact(LANES);
    let ys = y.chunks_exact(LANES);
    let (xr, yr) = (xs.remainder(), ys.remainder());
    for (a, b) in xs.zip(ys) {
        for k in 0..LANES {
            acc[k] += f64::from(a[k]) * b[k];
        }
    }
    let tail: f64 = xr.iter().zip(yr).map(|(&a, &b)| f64::from(a) * b).sum();
    acc.iter().sum::<f64>() + tail
}

pub fn squared_distance<T: Copy + Into<f64>>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x.into() - y.into();
            d * d
        })
        .sum()
}

/// `min_{y∈selected} ‖x − y‖²`, the max-min (k-center) criterion.
pub fn min_distance_gain<T, R>(selected: &[R], x: &[T]) -> Result<f64, DiversityError>
where
    T: Copy + Into<f64>,
    R: AsRef<[T]>,
{
    if selected.is_empty() {
        return Err(DiversityError::EmptySelection);
    }
    let mut best = f64::INFINITY;
    for y in selected {
        let y = y.as_ref();
        if y.len() != x.len() {
            return Err(DiversityError::DimensionMismatch {
                expected: y.len(),
                found: x.len(),
            });
        }
        best = best.min(squared_distance(y, x));
    }
    Ok(best)
}
