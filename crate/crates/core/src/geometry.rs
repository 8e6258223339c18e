//! Wasserstein-2 distance, displacement interpolation and two-measure
//! barycenters for uniform point clouds.
//!
//! Distances carry no `1/N` mass factor: `W2(mu, nu)^2` is the plain sum of
//! squared distances under the best pairing. Coupling costs are reported as
//! square roots so they compare directly with `W2`.

use crate::cloud::{Permutation, PointCloud};
use crate::coupling::{ot_coupling, squared_coupling_cost, Coupling};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Default number of grid intervals for sampled paths.
pub const DEFAULT_GRID: usize = 16;

/// `W2` and the optimal coupling that realizes it.
pub fn wasserstein_distance<T: Scalar>(
    mu: &PointCloud<T>,
    nu: &PointCloud<T>,
) -> Result<(T, Coupling<T>)> {
    let coupling = ot_coupling(mu, nu)?;
    Ok((coupling.cost(), coupling))
}

/// `sqrt(sum_i |x_i - y_sigma(i)|^2)`.
pub fn coupling_cost<T: Scalar>(
    mu: &PointCloud<T>,
    nu: &PointCloud<T>,
    sigma: &Permutation,
) -> Result<T> {
    squared_coupling_cost(mu, nu, sigma).map(T::sqrt)
}

/// `K + 1` equally spaced times from 0 to 1, both ends included exactly.
pub fn uniform_grid<T: Scalar>(intervals: usize) -> Result<Vec<T>> {
    if intervals == 0 {
        return Err(Error::InvalidGrid(
            "grid needs at least one interval".into(),
        ));
    }
    let k = T::from_usize(intervals).expect("grid size fits the scalar type");
    let mut times: Vec<T> = (0..=intervals)
        .map(|i| T::from_usize(i).expect("index fits the scalar type") / k)
        .collect();
    times[intervals] = T::one();
    Ok(times)
}

/// The interpolating path `t -> ((1 - t) id + t T)_# mu` induced by a coupling.
///
/// With an optimal coupling this is the constant-speed geodesic between the
/// endpoints; any other coupling gives a longer path whose length is the
/// coupling cost.
#[derive(Debug, Clone)]
pub struct GeodesicPath<T> {
    source: PointCloud<T>,
    target: PointCloud<T>,
    coupling: Coupling<T>,
    times: Vec<T>,
}

impl<T: Scalar> GeodesicPath<T> {
    pub fn new(
        source: PointCloud<T>,
        target: PointCloud<T>,
        coupling: Coupling<T>,
        times: Vec<T>,
    ) -> Result<Self> {
        source.check_compatible(&target)?;
        coupling.sigma.check_len(source.len())?;
        validate_times(&times)?;
        Ok(Self {
            source,
            target,
            coupling,
            times,
        })
    }

    /// Path on a uniform grid of `intervals` steps.
    pub fn with_grid(
        source: PointCloud<T>,
        target: PointCloud<T>,
        coupling: Coupling<T>,
        intervals: usize,
    ) -> Result<Self> {
        let times = uniform_grid(intervals)?;
        Self::new(source, target, coupling, times)
    }

    pub fn source(&self) -> &PointCloud<T> {
        &self.source
    }

    pub fn target(&self) -> &PointCloud<T> {
        &self.target
    }

    pub fn coupling(&self) -> &Coupling<T> {
        &self.coupling
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }
}

fn validate_times<T: Scalar>(times: &[T]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::InvalidGrid("need at least the two endpoints".into()));
    }
    if times[0] != T::zero() || times[times.len() - 1] != T::one() {
        return Err(Error::InvalidGrid(
            "grid must start at 0 and end at 1".into(),
        ));
    }
    if times
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
    {
        return Err(Error::InvalidGrid(
            "grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn check_time<T: Scalar>(t: T) -> Result<()> {
    if !(t >= T::zero() && t <= T::one()) {
        return Err(Error::TimeOutOfRange(t.to_f64_lossy()));
    }
    Ok(())
}

/// Point `i` of the result is `(1 - t) x_i + t y_sigma(i)`, in source order.
pub fn geodesic_point<T: Scalar>(path: &GeodesicPath<T>, t: T) -> Result<PointCloud<T>> {
    check_time(t)?;
    Ok(interpolate(
        &path.source,
        &path.target,
        &path.coupling.sigma,
        t,
    ))
}

fn interpolate<T: Scalar>(
    source: &PointCloud<T>,
    target: &PointCloud<T>,
    sigma: &Permutation,
    t: T,
) -> PointCloud<T> {
    let s = T::one() - t;
    let mut data = Vec::with_capacity(source.len() * source.dim());
    for (i, x) in source.points().enumerate() {
        let y = target.point(sigma[i]);
        data.extend(x.iter().zip(y).map(|(&a, &b)| s * a + t * b));
    }
    PointCloud::from_matrix_unchecked(Matrix::from_parts_unchecked(
        source.len(),
        source.dim(),
        data,
    ))
}

/// The clouds at every time of the path's grid, in order.
pub fn sample_path<T: Scalar>(path: &GeodesicPath<T>) -> Vec<PointCloud<T>> {
    path.times
        .iter()
        .map(|&t| interpolate(&path.source, &path.target, &path.coupling.sigma, t))
        .collect()
}

/// Weighted two-measure barycenter `argmin (1-t) W2(mu0, .)^2 + t W2(mu1, .)^2`,
/// obtained in closed form as the OT geodesic at `t`.
pub fn barycenter<T: Scalar>(
    mu0: &PointCloud<T>,
    mu1: &PointCloud<T>,
    t: T,
) -> Result<PointCloud<T>> {
    check_time(t)?;
    let coupling = ot_coupling(mu0, mu1)?;
    Ok(interpolate(mu0, mu1, &coupling.sigma, t))
}

/// The barycenter objective `(1-t) W2(mu0, nu)^2 + t W2(mu1, nu)^2`.
pub fn barycenter_objective<T: Scalar>(
    mu0: &PointCloud<T>,
    mu1: &PointCloud<T>,
    t: T,
    nu: &PointCloud<T>,
) -> Result<T> {
    check_time(t)?;
    let a = ot_coupling(mu0, nu)?.squared_cost;
    let b = ot_coupling(mu1, nu)?.squared_cost;
    Ok((T::one() - t) * a + t * b)
}

/// Length of the path, which is exactly the cost of its coupling.
pub fn path_length<T: Scalar>(path: &GeodesicPath<T>) -> T {
    path.coupling.cost()
}

/// `sum_k W2(mu_{t_k}, mu_{t_{k+1}})` over the path's grid.
///
/// Matches [`path_length`] whenever consecutive samples are close enough
/// that the induced pairing between them stays optimal, which holds for
/// fine grids unless two trajectories (nearly) collide. At a collision the
/// consecutive optimal pairing can swap the colliding points and the sum
/// comes out shorter.
pub fn discretized_length<T: Scalar>(path: &GeodesicPath<T>) -> Result<T> {
    let samples = sample_path(path);
    let mut total = T::zero();
    for w in samples.windows(2) {
        total += wasserstein_distance(&w[0], &w[1])?.0;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::clouds_equivalent;
    use crate::coupling::{clip_coupling, MethodTag};

    fn example() -> (PointCloud<f64>, PointCloud<f64>) {
        (
            PointCloud::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap(),
            PointCloud::from_rows(&[[2.0, 0.0], [0.0, 1.0]]).unwrap(),
        )
    }

    fn single() -> (PointCloud<f64>, PointCloud<f64>) {
        (
            PointCloud::from_rows(&[[0.0, 0.0]]).unwrap(),
            PointCloud::from_rows(&[[2.0, 0.0]]).unwrap(),
        )
    }

    #[test]
    fn worked_example_distance_and_costs() {
        let (mu, nu) = example();
        let (w2, c) = wasserstein_distance(&mu, &nu).unwrap();
        assert_eq!(w2, 2.0_f64.sqrt());
        assert_eq!(c.method, MethodTag::Ot);
        let clip = Permutation::identity(2);
        assert_eq!(coupling_cost(&mu, &nu, &clip).unwrap(), 6.0_f64.sqrt());
        assert_eq!(coupling_cost(&mu, &nu, &c.sigma).unwrap(), w2);
        assert_eq!(coupling_cost(&mu, &mu, &clip).unwrap(), 0.0);
    }

    #[test]
    fn distance_to_self_is_zero() {
        let (mu, _) = example();
        let (w2, c) = wasserstein_distance(&mu, &mu).unwrap();
        assert_eq!(w2, 0.0);
        assert_eq!(c.squared_cost, 0.0);
    }

    #[test]
    fn translation_distance() {
        let mu = PointCloud::from_rows(&[[0.0, 0.0], [3.0, 1.0], [-1.0, 2.0], [0.5, 0.5]]).unwrap();
        let v = [0.25, -0.5];
        let nu = mu.translate(&v).unwrap();
        let (w2, _) = wasserstein_distance(&mu, &nu).unwrap();
        let expected = 2.0 * (0.25_f64 * 0.25 + 0.25).sqrt();
        assert!((w2 - expected).abs() < 1e-12);
    }

    #[test]
    fn invalid_permutation_length() {
        let (mu, nu) = example();
        assert!(coupling_cost(&mu, &nu, &Permutation::identity(3)).is_err());
    }

    #[test]
    fn single_point_midpoint() {
        let (mu, nu) = single();
        let c = clip_coupling(1).unwrap().evaluate(&mu, &nu).unwrap();
        let path = GeodesicPath::new(mu.clone(), nu.clone(), c, vec![0.0, 0.5, 1.0]).unwrap();
        let mid = geodesic_point(&path, 0.5).unwrap();
        assert_eq!(mid.point(0), &[1.0, 0.0]);
        let samples = sample_path(&path);
        assert_eq!(samples.len(), 3);
        assert_eq!(samples[0], mu);
        assert_eq!(samples[1].point(0), &[1.0, 0.0]);
        assert_eq!(samples[2], nu);
    }

    #[test]
    fn endpoints_are_exact() {
        let (mu, nu) = example();
        let (_, c) = wasserstein_distance(&mu, &nu).unwrap();
        let path = GeodesicPath::with_grid(mu.clone(), nu.clone(), c, 1).unwrap();
        assert!(clouds_equivalent(&geodesic_point(&path, 0.0).unwrap(), &mu, 0.0).unwrap());
        assert!(clouds_equivalent(&geodesic_point(&path, 1.0).unwrap(), &nu, 0.0).unwrap());
        assert_eq!(sample_path(&path).len(), 2);
    }

    #[test]
    fn rejects_times_outside_unit_interval() {
        let (mu, nu) = example();
        let (_, c) = wasserstein_distance(&mu, &nu).unwrap();
        let path = GeodesicPath::with_grid(mu.clone(), nu.clone(), c.clone(), 4).unwrap();
        assert!(matches!(
            geodesic_point(&path, 1.5),
            Err(Error::TimeOutOfRange(_))
        ));
        assert!(geodesic_point(&path, -0.1).is_err());
        assert!(geodesic_point(&path, f64::NAN).is_err());
        assert!(barycenter(&mu, &nu, 2.0).is_err());
        assert!(
            GeodesicPath::new(mu.clone(), nu.clone(), c.clone(), vec![0.0, 0.7, 0.5, 1.0]).is_err()
        );
        assert!(GeodesicPath::new(mu.clone(), nu.clone(), c.clone(), vec![0.1, 1.0]).is_err());
        assert!(GeodesicPath::new(mu, nu, c, vec![0.0]).is_err());
    }

    #[test]
    fn uniform_grid_cardinality() {
        let g: Vec<f64> = uniform_grid(16).unwrap();
        assert_eq!(g.len(), 17);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[16], 1.0);
        assert_eq!(g[8], 0.5);
        assert!(uniform_grid::<f64>(0).is_err());
    }

    #[test]
    fn barycenter_of_two_columns() {
        let mu0 = PointCloud::from_rows(&[[0.0, 0.0], [4.0, 0.0]]).unwrap();
        let mu1 = PointCloud::from_rows(&[[0.0, 2.0], [4.0, 2.0]]).unwrap();
        let mid = barycenter(&mu0, &mu1, 0.5).unwrap();
        let expected = PointCloud::from_rows(&[[0.0, 1.0], [4.0, 1.0]]).unwrap();
        assert!(clouds_equivalent(&mid, &expected, 0.0).unwrap());
        let start = barycenter(&mu0, &mu1, 0.0).unwrap();
        assert!(clouds_equivalent(&start, &mu0, 0.0).unwrap());
    }

    #[test]
    fn path_lengths_of_worked_example() {
        let (mu, nu) = example();
        let (w2, ot) = wasserstein_distance(&mu, &nu).unwrap();
        let ot_path = GeodesicPath::with_grid(mu.clone(), nu.clone(), ot, 8).unwrap();
        assert_eq!(path_length(&ot_path), w2);
        let d = discretized_length(&ot_path).unwrap();
        assert!((d - w2).abs() <= 1e-9 * w2);

        let clip = clip_coupling(2).unwrap().evaluate(&mu, &nu).unwrap();
        let clip_path = GeodesicPath::with_grid(mu, nu, clip, 8).unwrap();
        assert_eq!(path_length(&clip_path), 6.0_f64.sqrt());
        assert!(path_length(&clip_path) > w2);
    }

    #[test]
    fn crossing_trajectories_shorten_the_discretized_length() {
        // In 1-D the identity pairing makes the two points pass through each
        // other; consecutive samples around the crossing are cheaper to match
        // the other way round.
        // Positions 2t and 1 - 2t meet at t = 1/4, inside the first step.
        let mu = PointCloud::from_rows(&[[0.0], [1.0]]).unwrap();
        let nu = PointCloud::from_rows(&[[2.0], [-1.0]]).unwrap();
        let clip = clip_coupling(2).unwrap().evaluate(&mu, &nu).unwrap();
        let path = GeodesicPath::with_grid(mu, nu, clip, 3).unwrap();
        let d = discretized_length(&path).unwrap();
        assert!(d < path_length(&path) - 0.1);
    }

    #[test]
    fn degenerate_pair_is_constant() {
        let (mu, _) = example();
        let (w2, c) = wasserstein_distance(&mu, &mu).unwrap();
        assert_eq!(w2, 0.0);
        let path = GeodesicPath::with_grid(mu.clone(), mu.clone(), c, 4).unwrap();
        assert!(sample_path(&path).iter().all(|s| *s == mu));
        assert_eq!(discretized_length(&path).unwrap(), 0.0);
    }
}
