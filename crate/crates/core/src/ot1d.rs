//! One-dimensional optimal transport.
//!
//! Under squared Euclidean cost the optimal coupling between two equal-size
//! empirical measures on the line is the monotone one: match the i-th smallest
//! source value with the i-th smallest target value. Everything here is built
//! on that fact.

use crate::error::{Error, Result};
use crate::noise::{sorted_batch_draws, NoiseModel};

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Squared 2-Wasserstein distance between two equal-size empirical measures.
pub fn w2_squared_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    Ok(sorted_w2(&sorted(a), &sorted(b)))
}

/// Mean squared difference of two already-sorted vectors of equal length.
pub(crate) fn sorted_w2(a: &[f64], b: &[f64]) -> f64 {
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    ss / a.len() as f64
}

/// The monotone (quantile) coupling of a source sample to a target sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pairs: Vec<(f64, f64)>,
}

impl Coupling {
    pub fn quantile_map(source: &[f64], target: &[f64]) -> Result<Self> {
        if source.len() != target.len() {
            return Err(Error::Shape {
                expected: source.len(),
                actual: target.len(),
            });
        }
        let pairs = sorted(source).into_iter().zip(sorted(target)).collect();
        Ok(Self { pairs })
    }

    /// `(source, target)` pairs, both components ascending.
    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    /// Displacement `target - source` of each matched pair.
    pub fn velocities(&self) -> Vec<f64> {
        self.pairs.iter().map(|(s, t)| t - s).collect()
    }

    /// Transport cost, equal to [`w2_squared_1d`] of the two samples.
    pub fn cost(&self) -> f64 {
        self.velocities().iter().map(|v| v * v).sum::<f64>() / self.pairs.len() as f64
    }
}

/// Average over batches of the squared W2 distance between each batch of
/// effect values and an equally sized scaled noise sample.
///
/// The noise for batch `b` is `theta * draws[b]`, where `draws[b]` must be
/// sorted ascending.
pub fn conditional_w2_with_draws(ys: &[Vec<f64>], draws: &[Vec<f64>], theta: f64) -> Result<f64> {
    if ys.len() != draws.len() {
        return Err(Error::Shape {
            expected: ys.len(),
            actual: draws.len(),
        });
    }
    if ys.is_empty() {
        return Err(Error::InsufficientData("no batches".into()));
    }
    let mut total = 0.0;
    for (y, d) in ys.iter().zip(draws) {
        let noise: Vec<f64> = d.iter().map(|e| theta * e).collect();
        total += w2_squared_1d(y, &noise)?;
    }
    Ok(total / ys.len() as f64)
}

/// Conditional W2 estimate with fresh source draws from `seed`.
pub fn conditional_w2(ys: &[Vec<f64>], noise: &NoiseModel, seed: u64) -> Result<f64> {
    let sizes: Vec<usize> = ys.iter().map(Vec::len).collect();
    if sizes.contains(&0) {
        return Err(Error::InsufficientBatch { size: 0 });
    }
    let draws = sorted_batch_draws(&noise.source, &sizes, seed);
    conditional_w2_with_draws(ys, &draws, noise.theta())
}
