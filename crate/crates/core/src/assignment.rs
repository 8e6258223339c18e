//! Exact linear assignment over square cost matrices.
//!
//! The minimum of `sum_i c[i][sigma(i)]` over all permutations is found by
//! shortest augmenting paths with row/column potentials (the O(n^3)
//! Hungarian / Jonker-Volgenant family). A factorial-time enumerator is kept
//! alongside as a reference for small instances.

use crate::cloud::{Permutation, PointCloud};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest size accepted by [`solve_assignment_bruteforce`].
pub const BRUTEFORCE_MAX_N: usize = 10;

/// Slack allowed when checking dual feasibility of a solution.
pub const DUAL_SLACK: f64 = 1e-9;

/// Square matrix of nonnegative finite costs, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<T> {
    n: usize,
    cost: Vec<T>,
}

impl<T: Scalar> CostMatrix<T> {
    pub fn new(n: usize, cost: Vec<T>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty { rows: 0, dim: 0 });
        }
        if cost.len() != n * n {
            return Err(Error::Dimension(format!(
                "{} entries for a {n}x{n} cost matrix",
                cost.len()
            )));
        }
        if let Some(pos) = cost.iter().position(|c| !c.is_finite() || *c < T::zero()) {
            return Err(Error::Invalid(format!(
                "cost[{}][{}] = {} is not a finite nonnegative value",
                pos / n,
                pos % n,
                cost[pos]
            )));
        }
        Ok(Self { n, cost })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let mut cost = Vec::with_capacity(n * n);
        for r in rows {
            if r.as_ref().len() != n {
                return Err(Error::Dimension("cost matrix must be square".into()));
            }
            cost.extend_from_slice(r.as_ref());
        }
        Self::new(n, cost)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.cost[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.cost[i * self.n..(i + 1) * self.n]
    }

    /// `sum_i c[i][sigma[i]]`, accumulated in row order.
    pub fn total(&self, sigma: &Permutation) -> Result<T> {
        sigma.check_len(self.n)?;
        Ok(self.total_unchecked(sigma.as_slice()))
    }

    fn total_unchecked(&self, sigma: &[usize]) -> T {
        let mut acc = T::zero();
        for (i, &j) in sigma.iter().enumerate() {
            acc += self.get(i, j);
        }
        acc
    }
}

/// Squared Euclidean distance, coordinates summed in index order.
#[inline]
pub fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// `cost[i][j] = |x_i - y_j|^2`.
pub fn build_cost_matrix<T: Scalar>(
    mu: &PointCloud<T>,
    nu: &PointCloud<T>,
) -> Result<CostMatrix<T>> {
    mu.check_compatible(nu)?;
    let n = mu.len();
    let mut cost = Vec::with_capacity(n * n);
    for x in mu.points() {
        for y in nu.points() {
            cost.push(squared_distance(x, y));
        }
    }
    Ok(CostMatrix { n, cost })
}

/// An optimal (or enumerated) assignment and its total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment<T> {
    pub sigma: Permutation,
    pub squared_cost: T,
}

/// Row and column potentials proving optimality of an assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Duals<T> {
    pub rows: Vec<T>,
    pub cols: Vec<T>,
}

impl<T: Scalar> Duals<T> {
    /// Checks `u_i + v_j <= c_ij` everywhere and equality on the assignment,
    /// both up to `slack`. Together these certify that the assignment is a
    /// minimum (weak duality).
    pub fn certifies(&self, c: &CostMatrix<T>, assignment: &Assignment<T>, slack: T) -> bool {
        let n = c.n();
        let feasible =
            (0..n).all(|i| (0..n).all(|j| self.rows[i] + self.cols[j] <= c.get(i, j) + slack));
        let tight = assignment
            .sigma
            .as_slice()
            .iter()
            .enumerate()
            .all(|(i, &j)| (c.get(i, j) - self.rows[i] - self.cols[j]).abs() <= slack);
        feasible && tight
    }
}

/// Minimum-cost perfect assignment.
///
/// Rows are inserted one at a time; each insertion runs a Dijkstra-like
/// search over reduced costs `c - u - v` and augments along the shortest
/// path. Scans go in increasing column index with strict comparisons, so
/// the output is a deterministic function of the input (an all-zero matrix
/// yields the identity).
pub fn solve_assignment_exact<T: Scalar>(c: &CostMatrix<T>) -> Assignment<T> {
    solve_assignment_exact_with_duals(c).0
}

pub fn solve_assignment_exact_with_duals<T: Scalar>(
    c: &CostMatrix<T>,
) -> (Assignment<T>, Duals<T>) {
    let n = c.n();
    let inf = T::infinity();
    // 1-based with a sentinel column 0, as in the classic formulation.
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        minv.fill(inf);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let crow = c.row(i0 - 1);
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = crow[j - 1] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut sigma = vec![0usize; n];
    for j in 1..=n {
        sigma[row_of[j] - 1] = j - 1;
    }
    let squared_cost = c.total_unchecked(&sigma);
    let duals = Duals {
        rows: u[1..].to_vec(),
        cols: v[1..].to_vec(),
    };
    (
        Assignment {
            sigma: Permutation::from_vec_unchecked(sigma),
            squared_cost,
        },
        duals,
    )
}

/// Enumerates all `n!` permutations in lexicographic order and keeps the
/// first one attaining the minimum, i.e. the lexicographically smallest
/// optimal permutation.
pub fn solve_assignment_bruteforce<T: Scalar>(c: &CostMatrix<T>) -> Result<Assignment<T>> {
    let n = c.n();
    if n > BRUTEFORCE_MAX_N {
        return Err(Error::SizeGuard(format!(
            "brute-force assignment limited to n <= {BRUTEFORCE_MAX_N}, got {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_cost = c.total_unchecked(&perm);
    while next_permutation(&mut perm) {
        let cost = c.total_unchecked(&perm);
        if cost < best_cost {
            best_cost = cost;
            best.copy_from_slice(&perm);
        }
    }
    Ok(Assignment {
        sigma: Permutation::from_vec_unchecked(best),
        squared_cost: best_cost,
    })
}

/// Advances to the next permutation in lexicographic order; false after the last.
fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = p.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = p
        .iter()
        .rposition(|&x| x > p[i])
        .expect("pivot has a successor");
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}
