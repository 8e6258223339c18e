//! The three couplings compared in the interpolation experiments: optimal
//! transport, the row-order ("CLIP") pairing, and a seeded random pairing
//! that keeps row 0 fixed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assignment::{build_cost_matrix, solve_assignment_exact, squared_distance};
use crate::cloud::{Permutation, PointCloud};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Coupling family, without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "OT")]
    Ot,
    #[serde(rename = "CLIP")]
    Clip,
    #[serde(rename = "RANDOM")]
    Random,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Ot, Method::Clip, Method::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ot => "OT",
            Method::Clip => "CLIP",
            Method::Random => "RANDOM",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "OT" => Ok(Method::Ot),
            "CLIP" => Ok(Method::Clip),
            "RANDOM" => Ok(Method::Random),
            other => Err(Error::Invalid(format!("unknown coupling method {other:?}"))),
        }
    }
}

/// How a coupling was produced. Random couplings remember their seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodTag {
    Ot,
    Clip,
    Random(u64),
}

impl MethodTag {
    pub fn method(self) -> Method {
        match self {
            MethodTag::Ot => Method::Ot,
            MethodTag::Clip => Method::Clip,
            MethodTag::Random(_) => Method::Random,
        }
    }
}

/// A pairing of source point `i` with target point `sigma[i]`, not yet
/// evaluated against a particular pair of clouds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pairing {
    pub sigma: Permutation,
    pub method: MethodTag,
}

impl Pairing {
    pub fn evaluate<T: Scalar>(
        self,
        mu: &PointCloud<T>,
        nu: &PointCloud<T>,
    ) -> Result<Coupling<T>> {
        let squared_cost = squared_coupling_cost(mu, nu, &self.sigma)?;
        Ok(Coupling {
            sigma: self.sigma,
            squared_cost,
            method: self.method,
        })
    }
}

/// A pairing together with its squared cost `sum_i |x_i - y_sigma(i)|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling<T> {
    pub sigma: Permutation,
    pub squared_cost: T,
    pub method: MethodTag,
}

impl<T: Scalar> Coupling<T> {
    /// Square root of the squared cost, in the same units as W2.
    pub fn cost(&self) -> T {
        self.squared_cost.sqrt()
    }
}

/// `sum_i |x_i - y_sigma(i)|^2`: outer sum over `i` in order, inner sum over
/// coordinates in order. Every cost in the crate goes through this order.
pub fn squared_coupling_cost<T: Scalar>(
    mu: &PointCloud<T>,
    nu: &PointCloud<T>,
    sigma: &Permutation,
) -> Result<T> {
    mu.check_compatible(nu)?;
    sigma.check_len(mu.len())?;
    let mut acc = T::zero();
    for (i, &j) in sigma.as_slice().iter().enumerate() {
        acc += squared_distance(mu.point(i), nu.point(j));
    }
    Ok(acc)
}

/// Optimal transport coupling from the exact assignment solver.
pub fn ot_coupling<T: Scalar>(mu: &PointCloud<T>, nu: &PointCloud<T>) -> Result<Coupling<T>> {
    let cost = build_cost_matrix(mu, nu)?;
    let solved = solve_assignment_exact(&cost);
    Ok(Coupling {
        sigma: solved.sigma,
        squared_cost: solved.squared_cost,
        method: MethodTag::Ot,
    })
}

/// The identity pairing induced by row order.
pub fn clip_coupling(n: usize) -> Result<Pairing> {
    if n == 0 {
        return Err(Error::SizeGuard("coupling needs at least one point".into()));
    }
    Ok(Pairing {
        sigma: Permutation::identity(n),
        method: MethodTag::Clip,
    })
}

/// Keeps `sigma[0] = 0` and shuffles indices `1..n` with a Fisher-Yates
/// sweep from the last index downwards, driven by [`SplitMix64`].
///
/// For `i` from `n - 1` down to `2`, position `i` is swapped with a position
/// drawn uniformly from `1..=i`. The draw is rejection-sampled from the
/// 64-bit generator output, so the result is identical on every platform.
pub fn random_coupling(n: usize, seed: u64) -> Result<Pairing> {
    if n < 2 {
        return Err(Error::SizeGuard(format!(
            "random coupling needs at least 2 points, got {n}"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let mut sigma: Vec<usize> = (0..n).collect();
    for i in (2..n).rev() {
        let j = 1 + rng.below(i as u64) as usize;
        sigma.swap(i, j);
    }
    Ok(Pairing {
        sigma: Permutation::from_vec_unchecked(sigma),
        method: MethodTag::Random(seed),
    })
}

/// Builds and evaluates a coupling of the given family.
pub fn couple<T: Scalar>(
    method: Method,
    mu: &PointCloud<T>,
    nu: &PointCloud<T>,
    seed: u64,
) -> Result<Coupling<T>> {
    mu.check_compatible(nu)?;
    match method {
        Method::Ot => ot_coupling(mu, nu),
        Method::Clip => clip_coupling(mu.len())?.evaluate(mu, nu),
        Method::Random => random_coupling(mu.len(), seed)?.evaluate(mu, nu),
    }
}

/// SplitMix64 (Steele, Lea and Flood, 2014): a 64-bit state advanced by the
/// golden-ratio increment, output through a two-round xor-shift-multiply
/// finalizer.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        mix64(self.state)
    }

    /// Uniform integer in `0..bound`, by rejection of the biased low zone.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let r = self.next_u64();
            if r >= threshold {
                return r % bound;
            }
        }
    }
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-pair seed: FNV-1a over the UTF-8 bytes of `pair_id`, combined with
/// the run seed through the SplitMix64 finalizer.
pub fn pair_seed(pair_id: &str, global_seed: u64) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in pair_id.as_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    mix64(h ^ mix64(global_seed.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}
