use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ROUNDING_TIMES: [[f64; 3]; 22] = [
    [5.40, 5.50, 5.55],
    [5.85, 5.70, 5.75],
    [5.20, 5.60, 5.50],
    [5.55, 5.50, 5.40],
    [5.90, 5.85, 5.70],
    [5.45, 5.55, 5.60],
    [5.40, 5.40, 5.35],
    [5.45, 5.50, 5.35],
    [5.25, 5.15, 5.00],
    [5.85, 5.80, 5.70],
    [5.25, 5.20, 5.10],
    [5.65, 5.55, 5.45],
    [5.60, 5.35, 5.45],
    [5.05, 5.00, 4.95],
    [5.50, 5.50, 5.40],
    [5.45, 5.55, 5.50],
    [5.55, 5.55, 5.35],
    [5.45, 5.50, 5.55],
    [5.50, 5.45, 5.25],
    [5.65, 5.60, 5.40],
    [5.70, 5.65, 5.55],
    [6.30, 6.30, 6.25],
];

fn matrix(rows: &[Vec<f64>]) -> ScoreMatrix {
    ScoreMatrix::new(rows.to_vec()).unwrap()
}

/// Enumerates every combination of within-block permutations directly.
fn brute_friedman_p(m: &ScoreMatrix) -> f64 {
    let ranks: Vec<Vec<f64>> = m.rows().iter().map(|r| average_ranks(r)).collect();
    let k = m.models();
    let ssq = |rows: &[Vec<f64>]| -> f64 {
        (0..k)
            .map(|j| rows.iter().map(|r| r[j]).sum::<f64>().powi(2))
            .sum()
    };
    let observed = ssq(&ranks);
    let mut perms: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..k {
        perms = perms
            .into_iter()
            .flat_map(|p| {
                (0..k)
                    .filter(|i| !p.contains(i))
                    .map(|i| [p.clone(), vec![i]].concat())
                    .collect::<Vec<_>>()
            })
            .collect();
    }
    let (mut hit, mut total) = (0u64, 0u64);
    let mut idx = vec![0usize; ranks.len()];
    loop {
        let rows: Vec<Vec<f64>> = ranks
            .iter()
            .zip(&idx)
            .map(|(r, &pi)| perms[pi].iter().map(|&j| r[j]).collect())
            .collect();
        total += 1;
        if ssq(&rows) >= observed - 1e-9 {
            hit += 1;
        }
        let mut c = 0;
        loop {
            if c == idx.len() {
                return hit as f64 / total as f64;
            }
            idx[c] += 1;
            if idx[c] < perms.len() {
                break;
            }
            idx[c] = 0;
            c += 1;
        }
    }
}

fn brute_wilcoxon_p(d: &[f64]) -> f64 {
    let d: Vec<f64> = d.iter().copied().filter(|v| *v != 0.0).collect();
    let ranks = average_ranks(&d.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let n = d.len();
    let total: f64 = ranks.iter().sum();
    let rp: f64 = ranks
        .iter()
        .zip(&d)
        .filter(|(_, v)| **v > 0.0)
        .map(|(r, _)| r)
        .sum();
    let stat = rp.min(total - rp);
    let mut hit = 0u64;
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| ranks[i])
            .sum();
        if s.min(total - s) <= stat + 1e-9 {
            hit += 1;
        }
    }
    hit as f64 / (1u64 << n) as f64
}

#[test]
fn friedman_rounding_times() {
    let m = matrix(
        &ROUNDING_TIMES
            .iter()
            .map(|r| r.to_vec())
            .collect::<Vec<_>>(),
    );
    let r = friedman_test(&m);
    assert_eq!(r.method, PMethod::Asymptotic);
    assert!((r.statistic - 11.142857).abs() < 1e-3, "{r:?}");
    assert!((r.p_value - 0.003805).abs() < 1e-3, "{r:?}");
}

#[test]
fn friedman_exact_table_values() {
    // k = 3: n = 3 with chi2 = 6 is the single most extreme arrangement class
    let m = matrix(&[
        vec![1.0, 2.0, 3.0],
        vec![1.0, 2.0, 3.0],
        vec![1.0, 2.0, 3.0],
    ]);
    let r = friedman_test(&m);
    assert_eq!(r.method, PMethod::Exact);
    assert!((r.statistic - 6.0).abs() < 1e-12);
    assert!((r.p_value - 1.0 / 36.0).abs() < 1e-9);
    let m = matrix(&[
        vec![1.0, 2.0, 3.0],
        vec![1.0, 2.0, 3.0],
        vec![2.0, 1.0, 3.0],
    ]);
    let r = friedman_test(&m);
    assert!((r.statistic - 14.0 / 3.0).abs() < 1e-12);
    assert!((r.p_value - 0.19444).abs() < 1e-4);
    let m = matrix(&[
        vec![1.0, 2.0, 3.0],
        vec![1.0, 2.0, 3.0],
        vec![1.0, 2.0, 3.0],
        vec![1.0, 2.0, 3.0],
    ]);
    let r = friedman_test(&m);
    assert!((r.statistic - 8.0).abs() < 1e-12);
    assert!((r.p_value - 0.0046296).abs() < 1e-6);
    let m = matrix(&[
        vec![1.0, 2.0, 3.0],
        vec![1.0, 2.0, 3.0],
        vec![1.0, 2.0, 3.0],
        vec![2.0, 1.0, 3.0],
    ]);
    let r = friedman_test(&m);
    assert!((r.statistic - 6.5).abs() < 1e-12);
    assert!((r.p_value - 0.041667).abs() < 1e-5);
}

#[test]
fn friedman_exact_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let n = rng.random_range(2..=4);
        let k = rng.random_range(2..=4);
        // coarse values so ties occur
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| rng.random_range(0..4) as f64).collect())
            .collect();
        let m = matrix(&rows);
        let r = friedman_test(&m);
        if r.method == PMethod::Degenerate {
            continue;
        }
        assert!((r.p_value - brute_friedman_p(&m)).abs() < 1e-9, "{rows:?}");
    }
}

#[test]
fn friedman_dominant_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rows: Vec<Vec<f64>> = (0..5)
        .map(|_| {
            let mut r: Vec<f64> = (0..5).map(|_| rng.random_range(1.0..2.0)).collect();
            r[2] = 0.5;
            r
        })
        .collect();
    let r = friedman_test(&matrix(&rows));
    assert!(r.p_value < 0.05, "{r:?}");
    assert_eq!(r.mean_ranks[2], 1.0);
}

#[test]
fn friedman_identical_columns() {
    let m = matrix(&[vec![0.3, 0.3, 0.3], vec![0.1, 0.1, 0.1]]);
    let r = friedman_test(&m);
    assert_eq!(
        (r.statistic, r.p_value, r.method),
        (0.0, 1.0, PMethod::Degenerate)
    );
}

#[test]
fn friedman_exact_and_asymptotic_agree_in_the_tail() {
    // the k = 3 null is lumpy at ten blocks, so only rough agreement holds
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    while checked < 10 {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..3).map(|_| rng.random::<f64>()).collect())
            .collect();
        let m = matrix(&rows);
        let e = friedman_test_with(&m, PMethod::Exact).p_value;
        let a = friedman_test_with(&m, PMethod::Asymptotic).p_value;
        if a > 0.2 {
            continue;
        }
        checked += 1;
        assert!((e - a).abs() < 0.06, "exact {e} asymptotic {a}");
    }
}

#[test]
fn score_matrix_validation() {
    assert!(ScoreMatrix::new(vec![vec![1.0, 2.0]]).is_err());
    assert!(ScoreMatrix::new(vec![vec![1.0], vec![2.0]]).is_err());
    assert!(ScoreMatrix::new(vec![vec![1.0, 2.0], vec![1.0]]).is_err());
    assert!(ScoreMatrix::new(vec![vec![1.0, f64::NAN], vec![1.0, 2.0]]).is_err());
}

#[test]
fn wilcoxon_paired_textbook() {
    let x = [1.83, 0.50, 1.62, 2.48, 1.68, 1.88, 1.55, 3.06, 1.30];
    let y = [0.878, 0.647, 0.598, 2.05, 1.06, 1.29, 1.06, 3.14, 1.29];
    let r = wilcoxon_signed_rank(&x, &y).unwrap();
    assert_eq!(r.statistic, 5.0);
    assert_eq!(r.r_plus, 40.0);
    assert!((r.p_value - 0.0390625).abs() < 1e-12);
}

#[test]
fn wilcoxon_one_sample_textbook() {
    let d = [
        6.0, 8.0, 14.0, 16.0, 23.0, 24.0, 28.0, 29.0, 41.0, -48.0, 49.0, 56.0, 60.0, -67.0, 75.0,
    ];
    let r = wilcoxon_signed_rank(&d, &[0.0; 15]).unwrap();
    assert_eq!(r.statistic, 24.0);
    assert!((r.p_value - 0.041259765625).abs() < 1e-12);
}

#[test]
fn wilcoxon_small_and_degenerate() {
    let r = wilcoxon_signed_rank(&[2.0; 5], &[1.0, 1.5, 0.2, 0.4, 0.9]).unwrap();
    assert!((r.p_value - 0.0625).abs() < 1e-12);
    let same = wilcoxon_signed_rank(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
    assert_eq!((same.p_value, same.method), (1.0, PMethod::Degenerate));
    assert!(matches!(
        wilcoxon_signed_rank(&[1.0, 2.0], &[0.0, 0.0]),
        Err(Error::Input(_))
    ));
    assert!(matches!(
        wilcoxon_signed_rank(&[1.0], &[0.0, 0.0]),
        Err(Error::Dimension(_))
    ));
}

#[test]
fn wilcoxon_exact_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..30 {
        let n = rng.random_range(5..=14);
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(-4..=5) as f64).collect();
        let Ok(r) = wilcoxon_signed_rank(&d, &vec![0.0; n]) else {
            continue;
        };
        if r.method == PMethod::Exact {
            assert!((r.p_value - brute_wilcoxon_p(&d)).abs() < 1e-9, "{d:?}");
        }
    }
}

#[test]
fn wilcoxon_exact_and_normal_agree_at_ten() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..10 {
        let a: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
        let e = wilcoxon_signed_rank_with(&a, &b, Some(PMethod::Exact))
            .unwrap()
            .p_value;
        let n = wilcoxon_signed_rank_with(&a, &b, Some(PMethod::Asymptotic))
            .unwrap()
            .p_value;
        assert!((e - n).abs() < 0.02, "exact {e} normal {n}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn friedman_column_relabeling(rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 3..6), shift in 1usize..4) {
        let m = matrix(&rows);
        let rotated: Vec<Vec<f64>> = rows.iter().map(|r| {
            let mut r = r.clone();
            r.rotate_left(shift);
            r
        }).collect();
        let a = friedman_test(&m);
        let b = friedman_test(&matrix(&rotated));
        prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
        prop_assert!((a.statistic - b.statistic).abs() < 1e-9);
    }

    #[test]
    fn rank_tests_ignore_monotone_transforms(rows in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 5..8)) {
        let m = matrix(&rows);
        let t: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v.ln() * 3.0 + 7.0).collect()).collect();
        let a = friedman_test(&m);
        let b = friedman_test(&matrix(&t));
        prop_assert!((a.statistic - b.statistic).abs() < 1e-9);
        prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
        // paired differences keep their rank order only under positive affine maps
        let affine = |c: Vec<f64>| -> Vec<f64> { c.iter().map(|v| 2.5 * v - 1.0).collect() };
        let (c0, c1) = (m.column(0), m.column(1));
        let w1 = wilcoxon_signed_rank(&c0, &c1);
        let w2 = wilcoxon_signed_rank(&affine(c0.clone()), &affine(c1.clone()));
        if let (Ok(w1), Ok(w2)) = (w1, w2) {
            prop_assert_eq!(w1.statistic, w2.statistic);
        }
    }
}
