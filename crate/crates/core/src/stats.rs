//! Perceptual path length from consecutive image distances, and the
//! Wilcoxon signed-rank test used to compare coupling methods.

use std::fmt;

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::coupling::Method;
use crate::error::{Error, Result};

/// Largest effective sample size that gets an exact p-value.
pub const EXACT_MAX_N: usize = 25;

/// Distances `l_k` between image `k` and image `k + 1` along one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    pub pair_id: String,
    pub method: Method,
    scores: Vec<f64>,
}

impl ScoreSeries {
    pub fn new(pair_id: impl Into<String>, method: Method, scores: Vec<f64>) -> Result<Self> {
        let pair_id = pair_id.into();
        if scores.is_empty() {
            return Err(Error::Invalid(format!(
                "empty score series for {pair_id}/{method}"
            )));
        }
        if let Some(k) = scores.iter().position(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::Invalid(format!(
                "score {k} of {pair_id}/{method} is {}, expected a finite nonnegative value",
                scores[k]
            )));
        }
        Ok(Self {
            pair_id,
            method,
            scores,
        })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Number of consecutive-image distances (the grid size `K`).
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Plain arithmetic mean of the consecutive distances.
pub fn ppl(series: &ScoreSeries) -> f64 {
    mean(series.scores())
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample quantile with linear interpolation between order statistics
/// (`h = (n - 1) q`). Returns `None` for an empty slice.
pub fn quantile(xs: &[f64], q: f64) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

pub fn median(xs: &[f64]) -> Option<f64> {
    quantile(xs, 0.5)
}

/// Adjusted Fisher-Pearson sample skewness; `None` below three values or
/// for zero variance.
pub fn skewness(xs: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 3 {
        return None;
    }
    let m = mean(xs);
    let (m2, m3) = xs.iter().fold((0.0, 0.0), |(a, b), &x| {
        let d = x - m;
        (a + d * d, b + d * d * d)
    });
    let nf = n as f64;
    let (m2, m3) = (m2 / nf, m3 / nf);
    if m2 == 0.0 {
        return None;
    }
    let g1 = m3 / m2.powf(1.5);
    Some(g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0))
}

/// Significance annotation: `***` below 0.001, `**` below 0.01, `*` below 0.05.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stars {
    #[serde(rename = "-")]
    None,
    #[serde(rename = "*")]
    One,
    #[serde(rename = "**")]
    Two,
    #[serde(rename = "***")]
    Three,
}

impl Stars {
    pub fn from_p(p: f64) -> Self {
        if p < 0.001 {
            Stars::Three
        } else if p < 0.01 {
            Stars::Two
        } else if p < 0.05 {
            Stars::One
        } else {
            Stars::None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stars::None => "-",
            Stars::One => "*",
            Stars::Two => "**",
            Stars::Three => "***",
        }
    }
}

impl fmt::Display for Stars {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PValueMethod {
    /// No nonzero differences; p is 1 by convention.
    Degenerate,
    Exact,
    Normal,
}

/// Two-sided Wilcoxon signed-rank test result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WilcoxonResult {
    /// Pairs with a nonzero difference.
    pub n_effective: usize,
    /// `min(W+, W-)`.
    pub statistic: f64,
    /// Sum of ranks of positive differences `a - b`.
    pub w_plus: f64,
    pub p_value: f64,
    pub significance_stars: Stars,
    pub method: PValueMethod,
}

/// Ranked nonzero differences: absolute-value ranks (ties averaged) and signs.
struct SignedRanks {
    ranks: Vec<f64>,
    positive: Vec<bool>,
    /// Sizes of tie groups among the absolute differences.
    tie_groups: Vec<usize>,
}

fn signed_ranks(a: &[f64], b: &[f64]) -> SignedRanks {
    let mut d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    d.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    let n = d.len();
    let mut ranks = vec![0.0; n];
    let mut tie_groups = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && d[j].abs() == d[i].abs() {
            j += 1;
        }
        // Positions i..j share the average of ranks i+1..=j.
        let avg = (i + 1 + j) as f64 / 2.0;
        ranks[i..j].fill(avg);
        tie_groups.push(j - i);
        i = j;
    }
    SignedRanks {
        ranks,
        positive: d.iter().map(|x| *x > 0.0).collect(),
        tie_groups,
    }
}

/// Two-sided test of "median of `a_i - b_i` is zero".
///
/// Zero differences are dropped and tied magnitudes share their average
/// rank. Up to [`EXACT_MAX_N`] nonzero differences the p-value comes from
/// the exact null distribution of `W+` over all `2^n` sign assignments of
/// the observed ranks; beyond that a normal approximation with tie and
/// continuity corrections is used.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    let sr = prepare(a, b)?;
    let n = sr.ranks.len();
    if n <= EXACT_MAX_N {
        finish(&sr, exact_p(&sr), PValueMethod::Exact)
    } else {
        finish(&sr, normal_p(&sr), PValueMethod::Normal)
    }
}

/// Forces the exact null distribution regardless of sample size (n <= 62).
pub fn wilcoxon_exact(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    let sr = prepare(a, b)?;
    if sr.ranks.len() > 62 {
        return Err(Error::SizeGuard(
            "exact Wilcoxon limited to 62 nonzero differences".into(),
        ));
    }
    finish(&sr, exact_p(&sr), PValueMethod::Exact)
}

/// Forces the normal approximation regardless of sample size.
pub fn wilcoxon_normal(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    let sr = prepare(a, b)?;
    finish(&sr, normal_p(&sr), PValueMethod::Normal)
}

fn prepare(a: &[f64], b: &[f64]) -> Result<SignedRanks> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "paired samples have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Invalid(
            "Wilcoxon test needs at least one pair".into(),
        ));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Invalid("Wilcoxon inputs must be finite".into()));
    }
    Ok(signed_ranks(a, b))
}

fn w_plus(sr: &SignedRanks) -> f64 {
    sr.ranks
        .iter()
        .zip(&sr.positive)
        .filter(|(_, p)| **p)
        .map(|(r, _)| r)
        .sum()
}

fn finish(sr: &SignedRanks, p: f64, method: PValueMethod) -> Result<WilcoxonResult> {
    let n = sr.ranks.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            n_effective: 0,
            statistic: 0.0,
            w_plus: 0.0,
            p_value: 1.0,
            significance_stars: Stars::None,
            method: PValueMethod::Degenerate,
        });
    }
    let wp = w_plus(sr);
    let total = (n * (n + 1)) as f64 / 2.0;
    let p = p.clamp(0.0, 1.0);
    Ok(WilcoxonResult {
        n_effective: n,
        statistic: wp.min(total - wp),
        w_plus: wp,
        p_value: p,
        significance_stars: Stars::from_p(p),
        method,
    })
}

/// Exact two-sided p-value. Doubled ranks are integers even with ties, so
/// the null distribution of `2 W+` is a subset-sum count.
fn exact_p(sr: &SignedRanks) -> f64 {
    let n = sr.ranks.len();
    if n == 0 {
        return 1.0;
    }
    let doubled: Vec<usize> = sr
        .ranks
        .iter()
        .map(|r| (2.0 * r).round() as usize)
        .collect();
    let max_sum: usize = doubled.iter().sum();
    let mut counts = vec![0u64; max_sum + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let observed = (2.0 * w_plus(sr)).round() as usize;
    let total = 2f64.powi(n as i32);
    let lower: u64 = counts[..=observed].iter().sum();
    let upper: u64 = counts[observed..].iter().sum();
    (2.0 * lower.min(upper) as f64 / total).min(1.0)
}

fn normal_p(sr: &SignedRanks) -> f64 {
    let n = sr.ranks.len();
    if n == 0 {
        return 1.0;
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let ties: f64 = sr
        .tie_groups
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
    let dev = ((w_plus(sr) - mean).abs() - 0.5).max(0.0);
    let z = dev / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}
