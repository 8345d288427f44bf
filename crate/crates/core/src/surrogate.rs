//! Cubic radial basis function interpolant with a linear polynomial tail.
//!
//! For centers `x_1..x_n` in `R^m` the model is
//!
//! ```text
//! f(x) = sum_i w_i * |x - x_i|^3 + b . x + a
//! ```
//!
//! and the coefficients solve the `(n + m + 1)` square saddle-point system
//!
//! ```text
//! | Phi  P | | w |   | y |
//! | P^T  0 | | c | = | 0 |      Phi_ij = |x_i - x_j|^3,  P_i = (x_i, 1),  c = (b, a)
//! ```
//!
//! The cubic kernel is conditionally positive definite of order two, so the
//! system is nonsingular whenever the centers are distinct and `P` has full
//! column rank (the centers are not affinely degenerate).

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Points closer than this in the max-norm are treated as the same center.
pub const DEDUP_TOLERANCE: f64 = 1e-10;
/// Ridge added to the kernel diagonal when the exact solve fails.
pub const FALLBACK_RIDGE: f64 = 1e-8;

const RANK_TOLERANCE: f64 = 1e-10;
const RESIDUAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurrogateError {
    #[error("dataset is empty")]
    Empty,
    #[error("expected dimension {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite value in surrogate input")]
    NonFinite,
    #[error("{points} centers in dimension {dims} are affinely degenerate; the linear tail is undetermined")]
    Degenerate { points: usize, dims: usize },
    #[error("saddle-point system is singular or ill-conditioned (ridge {ridge:e} also failed)")]
    Singular { ridge: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    /// `h(r) = r^3`
    #[default]
    Cubic,
}

impl Kernel {
    #[inline]
    pub fn eval(self, r: f64) -> f64 {
        match self {
            Kernel::Cubic => r * r * r,
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn max_norm_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Training data for one objective. Points are kept pairwise distinct:
/// pushing a point within [`DEDUP_TOLERANCE`] of an existing one replaces
/// that entry's value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    dims: usize,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(dims: usize) -> Self {
        Self {
            dims,
            points: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_pairs(
        dims: usize,
        pairs: impl IntoIterator<Item = (Vec<f64>, f64)>,
    ) -> Result<Self, SurrogateError> {
        let mut data = Self::new(dims);
        for (x, y) in pairs {
            data.push(x, y)?;
        }
        Ok(data)
    }

    /// Adds a sample; returns `true` if it replaced a duplicate.
    pub fn push(&mut self, point: Vec<f64>, value: f64) -> Result<bool, SurrogateError> {
        if point.len() != self.dims {
            return Err(SurrogateError::DimensionMismatch {
                expected: self.dims,
                actual: point.len(),
            });
        }
        if !value.is_finite() || point.iter().any(|v| !v.is_finite()) {
            return Err(SurrogateError::NonFinite);
        }
        if let Some(i) = self
            .points
            .iter()
            .position(|p| max_norm_distance(p, &point) < DEDUP_TOLERANCE)
        {
            self.values[i] = value;
            return Ok(true);
        }
        self.points.push(point);
        self.values.push(value);
        Ok(false)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A fitted interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfModel {
    kernel: Kernel,
    centers: Vec<Vec<f64>>,
    weights: Vec<f64>,
    tail: Vec<f64>,
    constant: f64,
    ridge: f64,
}

impl RbfModel {
    /// Assembles a model from explicit coefficients.
    pub fn from_parts(
        centers: Vec<Vec<f64>>,
        weights: Vec<f64>,
        tail: Vec<f64>,
        constant: f64,
    ) -> Result<Self, SurrogateError> {
        let dims = tail.len();
        if centers.len() != weights.len() {
            return Err(SurrogateError::DimensionMismatch {
                expected: centers.len(),
                actual: weights.len(),
            });
        }
        if let Some(c) = centers.iter().find(|c| c.len() != dims) {
            return Err(SurrogateError::DimensionMismatch {
                expected: dims,
                actual: c.len(),
            });
        }
        Ok(Self {
            kernel: Kernel::Cubic,
            centers,
            weights,
            tail,
            constant,
            ridge: 0.0,
        })
    }

    pub fn fit(data: &Dataset) -> Result<Self, SurrogateError> {
        if data.is_empty() {
            return Err(SurrogateError::Empty);
        }
        let n = data.len();
        let m = data.dims();
        check_affine_rank(data)?;

        let kernel = Kernel::Cubic;
        let size = n + m + 1;
        let mut system = DMatrix::<f64>::zeros(size, size);
        for i in 0..n {
            for j in 0..i {
                let phi = kernel.eval(distance(&data.points[i], &data.points[j]));
                system[(i, j)] = phi;
                system[(j, i)] = phi;
            }
            for (k, &x) in data.points[i].iter().enumerate() {
                system[(i, n + k)] = x;
                system[(n + k, i)] = x;
            }
            system[(i, n + m)] = 1.0;
            system[(n + m, i)] = 1.0;
        }
        let mut rhs = DVector::<f64>::zeros(size);
        rhs.rows_mut(0, n).copy_from_slice(&data.values);

        let (solution, ridge) = match solve_saddle(&system, &rhs) {
            Some(z) => (z, 0.0),
            None => {
                for i in 0..n {
                    system[(i, i)] += FALLBACK_RIDGE;
                }
                let z = solve_saddle(&system, &rhs).ok_or(SurrogateError::Singular {
                    ridge: FALLBACK_RIDGE,
                })?;
                (z, FALLBACK_RIDGE)
            }
        };

        Ok(Self {
            kernel,
            centers: data.points.clone(),
            weights: solution.rows(0, n).iter().copied().collect(),
            tail: solution.rows(n, m).iter().copied().collect(),
            constant: solution[n + m],
            ridge,
        })
    }

    /// Adds `(point, value)` to `data` (deduplicating) and refits from scratch.
    pub fn update(
        &self,
        data: &mut Dataset,
        point: Vec<f64>,
        value: f64,
    ) -> Result<Self, SurrogateError> {
        if point.len() != self.dims() {
            return Err(SurrogateError::DimensionMismatch {
                expected: self.dims(),
                actual: point.len(),
            });
        }
        data.push(point, value)?;
        Self::fit(data)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, SurrogateError> {
        if x.len() != self.dims() {
            return Err(SurrogateError::DimensionMismatch {
                expected: self.dims(),
                actual: x.len(),
            });
        }
        let radial: f64 = self
            .centers
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * self.kernel.eval(distance(x, c)))
            .sum();
        let linear: f64 = self.tail.iter().zip(x).map(|(b, v)| b * v).sum();
        Ok(radial + linear + self.constant)
    }

    pub fn dims(&self) -> usize {
        self.tail.len()
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tail(&self) -> &[f64] {
        &self.tail
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// Ridge used by the solve; zero unless the fallback kicked in.
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// `max |P^T w|`, zero for an exact solve.
    pub fn orthogonality_defect(&self) -> f64 {
        let mut acc = vec![0.0; self.dims() + 1];
        for (c, w) in self.centers.iter().zip(&self.weights) {
            for (a, x) in acc.iter_mut().zip(c) {
                *a += w * x;
            }
            acc[self.dims()] += w;
        }
        acc.into_iter().map(f64::abs).fold(0.0, f64::max)
    }
}

fn check_affine_rank(data: &Dataset) -> Result<(), SurrogateError> {
    let n = data.len();
    let m = data.dims();
    let degenerate = SurrogateError::Degenerate { points: n, dims: m };
    if n < m + 1 {
        return Err(degenerate);
    }
    let p = DMatrix::from_fn(n, m + 1, |i, k| if k < m { data.points[i][k] } else { 1.0 });
    let sv = p.singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || min <= RANK_TOLERANCE * max {
        return Err(degenerate);
    }
    Ok(())
}

fn solve_saddle(system: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let lu = system.clone().lu();
    let mut z = lu.solve(rhs)?;
    // one step of iterative refinement
    let r = rhs - system * &z;
    if let Some(dz) = lu.solve(&r) {
        z += dz;
    }
    if z.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let residual = (rhs - system * &z).amax();
    let scale = system.amax() * z.amax() + rhs.amax();
    if residual > RESIDUAL_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
        return None;
    }
    Some(z)
}
