use embedot::assignment::squared_distance;
use embedot::geometry::{barycenter_objective, uniform_grid};
use embedot::{
    barycenter, build_cost_matrix, clip_coupling, cloud_to_matrix, clouds_equivalent, couple,
    discretized_length, geodesic_point, matrix_to_cloud, ot_coupling, random_coupling,
    solve_assignment_exact, wasserstein_distance, GeodesicPath, Matrix, Method, Permutation,
    PointCloud,
};
use proptest::prelude::*;

/// Minimum of `sum_i c(i, p(i))` over all permutations, by plain recursion.
fn brute_min(c: &[Vec<f64>]) -> f64 {
    fn go(c: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == c.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..c.len() {
            if !used[j] {
                used[j] = true;
                go(c, row + 1, used, acc + c[row][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(c, 0, &mut vec![false; c.len()], 0.0, &mut best);
    best
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn cloud_pair(
    max_n: usize,
    max_d: usize,
) -> impl Strategy<Value = (PointCloud<f64>, PointCloud<f64>)> {
    (2..=max_n, 1..=max_d).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(prop::collection::vec(-10.0..10.0f64, d), n),
            prop::collection::vec(prop::collection::vec(-10.0..10.0f64, d), n),
        )
            .prop_map(|(a, b)| {
                (
                    PointCloud::from_rows(&a).unwrap(),
                    PointCloud::from_rows(&b).unwrap(),
                )
            })
    })
}

fn cloud_triple(max_n: usize, max_d: usize) -> impl Strategy<Value = [PointCloud<f64>; 3]> {
    (1..=max_n, 1..=max_d).prop_flat_map(|(n, d)| {
        prop::collection::vec(
            prop::collection::vec(prop::collection::vec(-5.0..5.0f64, d), n),
            3,
        )
        .prop_map(|v| [0, 1, 2].map(|k| PointCloud::from_rows(&v[k]).unwrap()))
    })
}

fn rows(c: &PointCloud<f64>) -> Vec<Vec<f64>> {
    c.points().map(|p| p.to_vec()).collect()
}

fn shuffled(c: &PointCloud<f64>, perm: &[usize]) -> PointCloud<f64> {
    matrix_to_cloud(&cloud_to_matrix(c, perm).unwrap())
}

fn perm_strategy(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn exact_solver_matches_enumeration((mu, nu) in cloud_pair(7, 4)) {
        let c: Vec<Vec<f64>> = mu.points().map(|x| nu.points().map(|y| sq(x, y)).collect()).collect();
        let a = solve_assignment_exact(&build_cost_matrix(&mu, &nu).unwrap());
        let want = brute_min(&c);
        prop_assert!((a.squared_cost - want).abs() <= 1e-9 * want.max(1.0));
    }

    #[test]
    fn matrix_round_trip_is_equivalent((mu, _) in cloud_pair(8, 4), seed in any::<u64>()) {
        let order = random_coupling(mu.len(), seed).unwrap().sigma;
        let back = matrix_to_cloud(&cloud_to_matrix(&mu, order.as_slice()).unwrap());
        prop_assert!(clouds_equivalent(&mu, &back, 0.0).unwrap());
        prop_assert!(clouds_equivalent(&mu, &back, 1e-12).unwrap());
    }

    #[test]
    fn w2_is_a_metric([a, b, c] in cloud_triple(6, 3)) {
        let (ab, _) = wasserstein_distance(&a, &b).unwrap();
        let (ba, _) = wasserstein_distance(&b, &a).unwrap();
        let (bc, _) = wasserstein_distance(&b, &c).unwrap();
        let (ac, _) = wasserstein_distance(&a, &c).unwrap();
        let (aa, _) = wasserstein_distance(&a, &a).unwrap();
        prop_assert_eq!(aa, 0.0);
        prop_assert!((ab - ba).abs() <= 1e-9 * ab.max(1.0));
        prop_assert!(ac <= ab + bc + 1e-9);
    }

    #[test]
    fn optimal_cost_dominates_other_couplings((mu, nu) in cloud_pair(8, 4), seed in any::<u64>()) {
        let ot = ot_coupling(&mu, &nu).unwrap();
        for m in [Method::Clip, Method::Random] {
            let other = couple(m, &mu, &nu, seed).unwrap();
            prop_assert!(ot.squared_cost <= other.squared_cost);
        }
    }

    #[test]
    fn w2_ignores_row_order((mu, nu) in cloud_pair(7, 3), pa in perm_strategy(7), pb in perm_strategy(7)) {
        let n = mu.len();
        let pa: Vec<usize> = pa.into_iter().filter(|&i| i < n).collect();
        let pb: Vec<usize> = pb.into_iter().filter(|&i| i < n).collect();
        let (w, _) = wasserstein_distance(&mu, &nu).unwrap();
        let (w2, _) = wasserstein_distance(&shuffled(&mu, &pa), &shuffled(&nu, &pb)).unwrap();
        prop_assert!((w - w2).abs() <= 1e-9 * w.max(1.0));
    }

    #[test]
    fn w2_is_translation_invariant_and_scale_equivariant(
        (mu, nu) in cloud_pair(6, 3),
        shift in -5.0..5.0f64,
        s in -3.0..3.0f64,
    ) {
        let v = vec![shift; mu.dim()];
        let (w, _) = wasserstein_distance(&mu, &nu).unwrap();
        let (wt, _) = wasserstein_distance(&mu.translate(&v).unwrap(), &nu.translate(&v).unwrap()).unwrap();
        let (ws, _) = wasserstein_distance(&mu.scale(s).unwrap(), &nu.scale(s).unwrap()).unwrap();
        prop_assert!((w - wt).abs() <= 1e-9 * w.max(1.0));
        prop_assert!((ws - s.abs() * w).abs() <= 1e-9 * ws.max(1.0));
    }

    #[test]
    fn geodesic_has_constant_speed((mu, nu) in cloud_pair(6, 3)) {
        let ot = ot_coupling(&mu, &nu).unwrap();
        let w = ot.cost();
        let path = GeodesicPath::with_grid(mu, nu, ot, 4).unwrap();
        let times = uniform_grid::<f64>(4).unwrap();
        for (i, &s) in times.iter().enumerate() {
            for &t in &times[i + 1..] {
                let a = geodesic_point(&path, s).unwrap();
                let b = geodesic_point(&path, t).unwrap();
                let (d, _) = wasserstein_distance(&a, &b).unwrap();
                prop_assert!((d - (t - s) * w).abs() <= 1e-9 * w.max(1.0));
            }
        }
    }

    #[test]
    fn endpoints_are_source_and_target((mu, nu) in cloud_pair(6, 3), seed in any::<u64>()) {
        let c = couple(Method::Random, &mu, &nu, seed).unwrap();
        let sigma = c.sigma.clone();
        let path = GeodesicPath::with_grid(mu.clone(), nu.clone(), c, 3).unwrap();
        let start = geodesic_point(&path, 0.0).unwrap();
        let end = geodesic_point(&path, 1.0).unwrap();
        prop_assert_eq!(rows(&start), rows(&mu));
        let want: Vec<Vec<f64>> = sigma.as_slice().iter().map(|&j| nu.point(j).to_vec()).collect();
        prop_assert_eq!(rows(&end), want);
    }

    #[test]
    fn barycenter_beats_perturbations((mu, nu) in cloud_pair(4, 2), t in 0.0..=1.0f64, noise in prop::collection::vec(-0.5..0.5f64, 8)) {
        let b = barycenter(&mu, &nu, t).unwrap();
        let best = barycenter_objective(&mu, &nu, t, &b).unwrap();
        let data: Vec<f64> = b.as_matrix().as_slice().iter().zip(noise.iter().cycle()).map(|(x, e)| x + e).collect();
        let other = matrix_to_cloud(&Matrix::new(b.len(), b.dim(), data).unwrap());
        prop_assert!(best <= barycenter_objective(&mu, &nu, t, &other).unwrap() + 1e-12);
    }

    #[test]
    fn squared_distance_matches_naive(a in prop::collection::vec(-1e3..1e3f64, 1..16)) {
        let b: Vec<f64> = a.iter().map(|x| x * 0.5 - 1.0).collect();
        prop_assert!((squared_distance(&a, &b) - sq(&a, &b)).abs() <= 1e-9 * sq(&a, &b).max(1.0));
    }

    #[test]
    fn random_coupling_is_a_permutation_fixing_zero(n in 2usize..40, seed in any::<u64>()) {
        let p = random_coupling(n, seed).unwrap().sigma;
        prop_assert_eq!(p.as_slice()[0], 0);
        let mut sorted = p.into_vec();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn clip_coupling_is_identity(n in 1usize..40) {
        prop_assert!(clip_coupling(n).unwrap().sigma.is_identity());
    }
}

#[test]
fn generic_pair_discretized_length_matches_cost() {
    // Spread-out points in 16 dimensions keep trajectories apart.
    let mut state = 7u64;
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    let mut rows_of = |n: usize| {
        (0..n)
            .map(|_| (0..16).map(|_| next()).collect::<Vec<_>>())
            .collect::<Vec<_>>()
    };
    let mu = PointCloud::from_rows(&rows_of(6)).unwrap();
    let nu = PointCloud::from_rows(&rows_of(6)).unwrap();
    for m in Method::ALL {
        let c = couple(m, &mu, &nu, 11).unwrap();
        let cost = c.cost();
        let path = GeodesicPath::with_grid(mu.clone(), nu.clone(), c, 64).unwrap();
        let d = discretized_length(&path).unwrap();
        assert!((d - cost).abs() <= 1e-6 * cost, "{m}: {d} vs {cost}");
    }
}

#[test]
fn random_coupling_needs_two_points() {
    assert!(random_coupling(1, 0).is_err());
}

#[test]
fn permutation_rejects_repeats() {
    assert!(Permutation::from_vec(vec![0, 0, 1]).is_err());
    assert!(Permutation::from_vec(vec![0, 3, 1]).is_err());
}
