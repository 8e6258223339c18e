use embedot::stats::{wilcoxon_exact, wilcoxon_normal, PValueMethod};
use embedot::{wilcoxon_signed_rank, Stars};
use proptest::prelude::*;

/// Two-sided p by listing all `2^n` sign patterns of ranks `1..=n`.
fn enumerate_p(n: usize, w_plus: usize) -> f64 {
    let total = n * (n + 1) / 2;
    let w = w_plus.min(total - w_plus);
    let mut tail = 0u64;
    for mask in 0u32..(1 << n) {
        let s: usize = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| i + 1).sum();
        if s <= w {
            tail += 1;
        }
    }
    (2.0 * tail as f64 / (1u64 << n) as f64).min(1.0)
}

/// Differences with distinct magnitudes `1..=n`, positive exactly on the
/// ranks listed in `positive`.
fn diffs(n: usize, positive: &[usize]) -> Vec<f64> {
    (1..=n)
        .map(|r| {
            if positive.contains(&r) {
                r as f64
            } else {
                -(r as f64)
            }
        })
        .collect()
}

/// A set of ranks from `1..=n` summing to `target`, taken greedily.
fn ranks_summing_to(n: usize, mut target: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for r in (1..=n).rev() {
        if r <= target {
            out.push(r);
            target -= r;
        }
    }
    assert_eq!(target, 0);
    out
}

#[test]
fn critical_values_for_two_sided_five_percent() {
    let table = [(6, 0), (7, 2), (8, 3), (9, 5), (10, 8), (11, 10), (12, 13)];
    for (n, crit) in table {
        let zeros = vec![0.0; n];
        let at = diffs(n, &ranks_summing_to(n, crit));
        let above = diffs(n, &ranks_summing_to(n, crit + 1));
        let p_at = wilcoxon_exact(&at, &zeros).unwrap();
        let p_above = wilcoxon_exact(&above, &zeros).unwrap();
        assert_eq!(p_at.statistic, crit as f64);
        assert!(
            p_at.p_value <= 0.05,
            "n={n}: p={} at critical value",
            p_at.p_value
        );
        assert!(
            p_above.p_value > 0.05,
            "n={n}: p={} above critical value",
            p_above.p_value
        );
        assert_eq!(p_at.p_value, enumerate_p(n, crit));
    }
}

#[test]
fn all_positive_at_six_is_one_in_thirty_two() {
    let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[0.0; 6]).unwrap();
    assert_eq!(r.p_value, 0.03125);
    assert_eq!(r.significance_stars, Stars::One);
    assert_eq!(r.method, PValueMethod::Exact);
}

#[test]
fn matches_reference_values() {
    let d = [
        0.5, -1.2, 2.3, 3.1, -0.4, 1.8, 2.2, 0.9, -0.7, 1.5, 2.8, 3.3,
    ];
    let z = [0.0; 12];
    assert!((wilcoxon_exact(&d, &z).unwrap().p_value - 0.01611328125).abs() < 1e-15);
    assert!((wilcoxon_normal(&d, &z).unwrap().p_value - 0.020658377241239013).abs() < 1e-10);

    let d: Vec<f64> = (1..=30).map(|i| i as f64 * 0.1 - 0.8).collect();
    let r = wilcoxon_signed_rank(&d, &[0.0; 30]).unwrap();
    assert_eq!(r.method, PValueMethod::Normal);
    assert!((r.p_value - 0.00037434919228201367).abs() < 1e-10);

    let d = [1.0, 1.0, 2.0, 2.0, -3.0, 4.0, 4.0, 4.0, -5.0, 6.0];
    let p = wilcoxon_normal(&d, &[0.0; 10]).unwrap().p_value;
    assert!((p - 0.1834274418287195).abs() < 1e-10, "{p}");
}

#[test]
fn exact_and_normal_agree_at_twelve() {
    let z = [0.0; 12];
    for w in 0..=78 {
        let d = diffs(12, &ranks_summing_to(12, w));
        let e = wilcoxon_exact(&d, &z).unwrap().p_value;
        let a = wilcoxon_normal(&d, &z).unwrap().p_value;
        assert!((e - a).abs() <= 0.02, "W+={w}: exact {e} normal {a}");
    }
}

#[test]
fn zero_differences_are_degenerate() {
    let r = wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
    assert_eq!(r.method, PValueMethod::Degenerate);
    assert_eq!(r.p_value, 1.0);
    assert_eq!(r.significance_stars, Stars::None);
}

#[test]
fn rejects_bad_input() {
    assert!(wilcoxon_signed_rank(&[1.0], &[1.0, 2.0]).is_err());
    assert!(wilcoxon_signed_rank(&[], &[]).is_err());
    assert!(wilcoxon_signed_rank(&[f64::NAN], &[0.0]).is_err());
}

proptest! {
    #[test]
    fn swapping_samples_keeps_p(a in prop::collection::vec(-5.0..5.0f64, 1..40), shift in -1.0..1.0f64) {
        let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| x * 0.7 + shift + i as f64 * 0.01).collect();
        let ab = wilcoxon_signed_rank(&a, &b).unwrap();
        let ba = wilcoxon_signed_rank(&b, &a).unwrap();
        prop_assert_eq!(ab.p_value, ba.p_value);
        prop_assert_eq!(ab.statistic, ba.statistic);
    }

    #[test]
    fn exact_matches_enumeration(n in 1usize..=14, mask in any::<u32>()) {
        let positive: Vec<usize> = (1..=n).filter(|r| mask & (1 << r) != 0).collect();
        let d = diffs(n, &positive);
        let r = wilcoxon_exact(&d, &vec![0.0; n]).unwrap();
        prop_assert_eq!(r.p_value, enumerate_p(n, positive.iter().sum()));
    }
}
