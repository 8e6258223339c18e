//! Scaled dot-product attention and a harness that checks its permutation
//! behaviour: permuting the rows of the key/value input `X'` leaves the
//! output unchanged, permuting the query input `X` permutes the output rows.

use crate::cloud::Permutation;
use crate::coupling::SplitMix64;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Projection weights. `w_q` is `d_x x D`, `w_k` is `d_x' x D`, `w_v` is `d_x' x D_v`.
#[derive(Debug, Clone)]
pub struct AttentionWeights<T> {
    pub w_q: Matrix<T>,
    pub w_k: Matrix<T>,
    pub w_v: Matrix<T>,
}

impl<T: Scalar> AttentionWeights<T> {
    pub fn new(w_q: Matrix<T>, w_k: Matrix<T>, w_v: Matrix<T>) -> Result<Self> {
        if w_q.cols() != w_k.cols() {
            return Err(Error::Dimension(format!(
                "query width {} differs from key width {}",
                w_q.cols(),
                w_k.cols()
            )));
        }
        if w_k.rows() != w_v.rows() {
            return Err(Error::Dimension(format!(
                "key weights expect {} input features, value weights expect {}",
                w_k.rows(),
                w_v.rows()
            )));
        }
        Ok(Self { w_q, w_k, w_v })
    }

    /// Shared query/key width `D`.
    pub fn head_dim(&self) -> usize {
        self.w_q.cols()
    }
}

/// Row-wise softmax with the row maximum subtracted before exponentiation.
pub fn softmax_rows<T: Scalar>(scores: &Matrix<T>) -> Result<Matrix<T>> {
    let mut out = Vec::with_capacity(scores.rows() * scores.cols());
    for row in scores.row_iter() {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let start = out.len();
        let mut sum = T::zero();
        for &s in row {
            let e = (s - max).exp();
            sum += e;
            out.push(e);
        }
        for e in &mut out[start..] {
            *e = *e / sum;
        }
    }
    Matrix::new(scores.rows(), scores.cols(), out)
        .map_err(|e| Error::Numeric(format!("softmax produced {e}")))
}

/// `softmax_row(Q K^T / sqrt(D)) V` with `Q = X W_Q`, `K = X' W_K`, `V = X' W_V`.
pub fn attention<T: Scalar>(
    x: &Matrix<T>,
    x_prime: &Matrix<T>,
    w: &AttentionWeights<T>,
) -> Result<Matrix<T>> {
    attention_parts(x, x_prime, w).map(|(_, out)| out)
}

/// Returns the attention weights (softmax rows) alongside the output.
pub fn attention_parts<T: Scalar>(
    x: &Matrix<T>,
    x_prime: &Matrix<T>,
    w: &AttentionWeights<T>,
) -> Result<(Matrix<T>, Matrix<T>)> {
    let q = x.matmul(&w.w_q)?;
    let k = x_prime.matmul(&w.w_k)?;
    let v = x_prime.matmul(&w.w_v)?;
    let scale = T::from_usize(w.head_dim())
        .map(T::sqrt)
        .ok_or_else(|| Error::Numeric("head dimension not representable".into()))?;
    let mut scores = q.matmul(&k.transpose())?.into_vec();
    for s in &mut scores {
        *s = *s / scale;
    }
    let scores = Matrix::new(x.rows(), x_prime.rows(), scores)
        .map_err(|e| Error::Numeric(format!("attention scores overflowed: {e}")))?;
    let weights = softmax_rows(&scores)?;
    let out = weights.matmul(&v)?;
    if out.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("attention output is not finite".into()));
    }
    Ok((weights, out))
}

/// Outcome of one permutation check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvarianceCheck<T> {
    pub holds: bool,
    pub max_deviation: T,
}

/// Compares `attention(X, X')` with `attention(X, P X')` in the max-norm.
pub fn check_cross_attention_invariance<T: Scalar>(
    x: &Matrix<T>,
    x_prime: &Matrix<T>,
    w: &AttentionWeights<T>,
    p: &Permutation,
    tol: T,
) -> Result<InvarianceCheck<T>> {
    p.check_len(x_prime.rows())?;
    let base = attention(x, x_prime, w)?;
    let permuted = attention(x, &x_prime.select_rows(p.as_slice())?, w)?;
    let max_deviation = base.max_abs_diff(&permuted)?;
    Ok(InvarianceCheck {
        holds: max_deviation <= tol,
        max_deviation,
    })
}

/// Same comparison but permuting the query rows `X`: the output rows get
/// permuted, so the matrices differ for generic inputs.
pub fn query_permutation_deviation<T: Scalar>(
    x: &Matrix<T>,
    x_prime: &Matrix<T>,
    w: &AttentionWeights<T>,
    p: &Permutation,
) -> Result<T> {
    p.check_len(x.rows())?;
    let base = attention(x, x_prime, w)?;
    let permuted = attention(&x.select_rows(p.as_slice())?, x_prime, w)?;
    base.max_abs_diff(&permuted)
}

/// Settings for a batch of random invariance checks.
#[derive(Debug, Clone)]
pub struct HarnessConfig {
    pub instances: usize,
    /// Upper bound on query rows; each instance draws `2..=max_queries`.
    pub max_queries: usize,
    /// Key/value rows (77 for the CLIP token layout).
    pub context_rows: usize,
    /// Upper bound on feature widths; each instance draws `1..=max_dim`.
    pub max_dim: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// Threshold the query-permutation deviation must exceed.
    pub specificity_threshold: f64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            instances: 1000,
            max_queries: 8,
            context_rows: 77,
            max_dim: 32,
            seed: 0,
            tolerance: 1e-9,
            specificity_threshold: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct HarnessReport {
    pub instances: usize,
    pub invariant: usize,
    pub max_deviation: f64,
    /// Instances where permuting `X` instead moved the output by more than the threshold.
    pub query_sensitive: usize,
    pub max_softmax_row_error: f64,
}

impl HarnessReport {
    pub fn all_invariant(&self) -> bool {
        self.invariant == self.instances
    }

    pub fn specificity(&self) -> f64 {
        if self.instances == 0 {
            return 0.0;
        }
        self.query_sensitive as f64 / self.instances as f64
    }
}

struct Sampler(SplitMix64);

impl Sampler {
    /// Uniform on `[-1, 1)` from the top 53 bits.
    fn unit(&mut self) -> f64 {
        let u = (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        2.0 * u - 1.0
    }

    fn size(&mut self, lo: usize, hi: usize) -> usize {
        lo + self.0.below((hi - lo + 1) as u64) as usize
    }

    fn matrix(&mut self, rows: usize, cols: usize, scale: f64) -> Matrix<f64> {
        let data = (0..rows * cols).map(|_| scale * self.unit()).collect();
        Matrix::new(rows, cols, data).expect("finite samples")
    }

    /// Uniform permutation, redrawn until it is not the identity.
    fn non_identity_shuffle(&mut self, n: usize) -> Permutation {
        loop {
            let mut p: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = self.0.below(i as u64 + 1) as usize;
                p.swap(i, j);
            }
            let p = Permutation::from_vec_unchecked(p);
            if n < 2 || !p.is_identity() {
                return p;
            }
        }
    }
}

/// Runs `config.instances` random cross-attention checks in `f64`.
///
/// Inputs are uniform on `[-2, 2)`, weights uniform on `[-1, 1)`; every
/// instance draws its own query count and feature widths.
pub fn run_invariance_harness(config: &HarnessConfig) -> Result<HarnessReport> {
    if config.max_queries < 2 || config.context_rows < 1 || config.max_dim < 1 {
        return Err(Error::Invalid(
            "harness needs max_queries >= 2, context_rows >= 1, max_dim >= 1".into(),
        ));
    }
    let mut rng = Sampler(SplitMix64::new(config.seed));
    let mut report = HarnessReport {
        instances: config.instances,
        invariant: 0,
        max_deviation: 0.0,
        query_sensitive: 0,
        max_softmax_row_error: 0.0,
    };
    for _ in 0..config.instances {
        let n_x = rng.size(2, config.max_queries);
        let d_x = rng.size(1, config.max_dim);
        let d_xp = rng.size(1, config.max_dim);
        let head = rng.size(1, config.max_dim);
        let d_v = rng.size(1, config.max_dim);
        let x = rng.matrix(n_x, d_x, 2.0);
        let x_prime = rng.matrix(config.context_rows, d_xp, 2.0);
        let w = AttentionWeights::new(
            rng.matrix(d_x, head, 1.0),
            rng.matrix(d_xp, head, 1.0),
            rng.matrix(d_xp, d_v, 1.0),
        )?;

        let (weights, _) = attention_parts(&x, &x_prime, &w)?;
        for row in weights.row_iter() {
            let err = (row.iter().sum::<f64>() - 1.0).abs();
            report.max_softmax_row_error = report.max_softmax_row_error.max(err);
        }

        let p = rng.non_identity_shuffle(config.context_rows);
        let check = check_cross_attention_invariance(&x, &x_prime, &w, &p, config.tolerance)?;
        report.max_deviation = report.max_deviation.max(check.max_deviation);
        if check.holds {
            report.invariant += 1;
        }

        let q = rng.non_identity_shuffle(n_x);
        if query_permutation_deviation(&x, &x_prime, &w, &q)? > config.specificity_threshold {
            report.query_sensitive += 1;
        }
    }
    Ok(report)
}
