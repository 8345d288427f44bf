//! Latin hypercube designs on the unit cube.

use rand::distr::Open01;
use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SamplingError {
    #[error("design needs at least one point and one dimension (got {points} x {dims})")]
    EmptyDesign { points: usize, dims: usize },
}

/// `points × dims` design with entries in `(0, 1)`. Every column places
/// exactly one entry in each stratum `[k/points, (k+1)/points)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: Vec<Vec<f64>>,
    dims: usize,
}

impl DesignMatrix {
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<Vec<f64>> {
        self.rows
    }

    pub fn points(&self) -> usize {
        self.rows.len()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r[j])
    }
}

/// Jittered Latin hypercube sample: each column is an independent random
/// permutation of the strata with a uniform offset inside each stratum.
pub fn lhs<R: Rng + ?Sized>(
    points: usize,
    dims: usize,
    rng: &mut R,
) -> Result<DesignMatrix, SamplingError> {
    if points == 0 || dims == 0 {
        return Err(SamplingError::EmptyDesign { points, dims });
    }
    let n = points as f64;
    let mut rows = vec![vec![0.0; dims]; points];
    let mut strata: Vec<usize> = (0..points).collect();
    for j in 0..dims {
        strata.shuffle(rng);
        for (row, &k) in rows.iter_mut().zip(&strata) {
            row[j] = loop {
                let jitter: f64 = rng.sample(Open01);
                let v = (k as f64 + jitter) / n;
                // rounding can push v onto the next stratum's edge
                if (v * n).floor() as usize == k && v < 1.0 {
                    break v;
                }
            };
        }
    }
    Ok(DesignMatrix { rows, dims })
}

/// Default initial design size: `2(m + 1)`, capped at half the budget.
pub fn default_initial_size(dims: usize, budget: usize) -> usize {
    (2 * (dims + 1)).min(budget / 2).max(1)
}
