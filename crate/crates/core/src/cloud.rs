//! Uniform point clouds and their equivalence with embedding matrices.
//!
//! A cloud of `N` points in `R^d` stands for the uniform measure that puts
//! mass `1/N` on each point. The mass is implicit and never stored. Many
//! matrices map to the same cloud: any row permutation of a matrix gives an
//! equivalent cloud, so equality between clouds is a multiset comparison.

use std::cmp::Ordering;

use crate::assignment::{solve_assignment_exact, CostMatrix};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// A bijection on `{0, .., n-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn from_vec(indices: Vec<usize>) -> Result<Self> {
        let n = indices.len();
        let mut seen = vec![false; n];
        for (pos, &k) in indices.iter().enumerate() {
            if k >= n {
                return Err(Error::InvalidPermutation(format!(
                    "entry {pos} is {k}, out of range for length {n}"
                )));
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::InvalidPermutation(format!(
                    "index {k} appears more than once"
                )));
            }
        }
        Ok(Self(indices))
    }

    pub(crate) fn from_vec_unchecked(indices: Vec<usize>) -> Self {
        debug_assert!(Self::from_vec(indices.clone()).is_ok());
        Self(indices)
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        if self.0.len() != n {
            return Err(Error::InvalidPermutation(format!(
                "length {} does not match point count {n}",
                self.0.len()
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &k)| i == k)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &k) in self.0.iter().enumerate() {
            inv[k] = i;
        }
        Self(inv)
    }
}

impl std::ops::Index<usize> for Permutation {
    type Output = usize;

    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

/// `N` points in `R^d`, each carrying mass `1/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T> {
    points: Matrix<T>,
}

impl<T: Scalar> PointCloud<T> {
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        Matrix::from_rows(rows).map(|points| Self { points })
    }

    pub(crate) fn from_matrix_unchecked(points: Matrix<T>) -> Self {
        Self { points }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.rows()
    }

    /// Always false: a valid cloud has at least one point.
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[T] {
        self.points.row(i)
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.points.row_iter()
    }

    /// The points in stored order, as a matrix.
    pub fn as_matrix(&self) -> &Matrix<T> {
        &self.points
    }

    /// Adds `v` to every point.
    pub fn translate(&self, v: &[T]) -> Result<Self> {
        if v.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "translation has {} components, cloud dimension is {}",
                v.len(),
                self.dim()
            )));
        }
        let data = self
            .points
            .row_iter()
            .flat_map(|p| p.iter().zip(v).map(|(&a, &b)| a + b))
            .collect();
        Matrix::new(self.len(), self.dim(), data).map(|points| Self { points })
    }

    pub fn scale(&self, s: T) -> Result<Self> {
        let data = self.points.as_slice().iter().map(|&a| a * s).collect();
        Matrix::new(self.len(), self.dim(), data).map(|points| Self { points })
    }

    pub(crate) fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() || self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "clouds have shapes {}x{} and {}x{}",
                self.len(),
                self.dim(),
                other.len(),
                other.dim()
            )));
        }
        Ok(())
    }
}

/// Reads each row of `e` as one point of a uniform cloud.
pub fn matrix_to_cloud<T: Scalar>(e: &Matrix<T>) -> PointCloud<T> {
    PointCloud { points: e.clone() }
}

/// Materializes one matrix representative: row `k` is point `order[k]`.
pub fn cloud_to_matrix<T: Scalar>(mu: &PointCloud<T>, order: &[usize]) -> Result<Matrix<T>> {
    mu.points.select_rows(order)
}

/// Whether some permutation matches every point of `mu` to a point of `nu`
/// within `tol` in the max-norm.
///
/// `tol = 0` compares sorted point lists exactly. Positive tolerances solve
/// an assignment on the 0/1 cost "pair is farther than `tol`", which is exact
/// and does not assume distinct points.
pub fn clouds_equivalent<T: Scalar>(
    mu: &PointCloud<T>,
    nu: &PointCloud<T>,
    tol: T,
) -> Result<bool> {
    mu.check_compatible(nu)?;
    if tol.is_nan() || tol < T::zero() || !tol.is_finite() {
        return Err(Error::Invalid(format!(
            "tolerance must be finite and nonnegative, got {tol}"
        )));
    }
    if tol == T::zero() {
        return Ok(sorted_points_equal(mu, nu));
    }
    let n = mu.len();
    let mut cost = Vec::with_capacity(n * n);
    for x in mu.points() {
        for y in nu.points() {
            let far = x.iter().zip(y).any(|(&a, &b)| (a - b).abs() > tol);
            cost.push(if far { 1.0 } else { 0.0 });
        }
    }
    let solved = solve_assignment_exact(&CostMatrix::new(n, cost)?);
    Ok(solved.squared_cost == 0.0)
}

fn lex_cmp<T: Scalar>(a: &[T], b: &[T]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn sorted_points_equal<T: Scalar>(mu: &PointCloud<T>, nu: &PointCloud<T>) -> bool {
    let mut a: Vec<&[T]> = mu.points().collect();
    let mut b: Vec<&[T]> = nu.points().collect();
    a.sort_by(|x, y| lex_cmp(x, y));
    b.sort_by(|x, y| lex_cmp(x, y));
    a.iter().zip(&b).all(|(x, y)| x == y)
}
