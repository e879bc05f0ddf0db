//! Statistics checked against brute-force enumeration and nalgebra's
//! eigensolver.

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use stereoclust_core::stats::{error_rate, mann_whitney_u, pca_project, zscore};

/// Rank sums of every size-`n` subset of the ranks `1..=total`.
fn all_rank_sums(total: usize, n: usize) -> Vec<usize> {
    fn recurse(next: usize, total: usize, remaining: usize, sum: usize, out: &mut Vec<usize>) {
        if remaining == 0 {
            out.push(sum);
            return;
        }
        for rank in next..=(total - remaining + 1) {
            recurse(rank + 1, total, remaining - 1, sum + rank, out);
        }
    }
    let mut out = Vec::new();
    recurse(1, total, n, 0, &mut out);
    out
}

/// Exact two-sided Mann-Whitney p by enumerating every C(n+m, n) labeling.
/// Assumes distinct values (ranks are then a permutation of 1..=n+m).
fn brute_force_p(a: &[f64], b: &[f64]) -> f64 {
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let n = a.len();
    let total = pooled.len();

    let rank_sum: usize = a
        .iter()
        .map(|v| pooled.iter().position(|p| p == v).unwrap() + 1)
        .sum();
    let offset = n * (n + 1) / 2;
    let u_a = (rank_sum - offset) as f64;
    let nm = (n * (total - n)) as f64;
    let u_low = u_a.min(nm - u_a);

    let sums = all_rank_sums(total, n);
    let at_or_below = sums
        .iter()
        .filter(|&&s| (s - offset) as f64 <= u_low)
        .count();
    (2.0 * at_or_below as f64 / sums.len() as f64).min(1.0)
}

fn distinct_sample(rng: &mut ChaCha8Rng, len: usize, taken: &mut Vec<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let v: f64 = rng.gen_range(-10.0..10.0);
        if !taken.contains(&v) {
            taken.push(v);
            out.push(v);
        }
    }
    out
}

#[test]
fn exact_p_matches_brute_force_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(314);
    for dataset in 0..50 {
        let n = rng.gen_range(1..=6usize);
        let m = rng.gen_range(1..=6usize);
        let mut taken = Vec::new();
        let a = distinct_sample(&mut rng, n, &mut taken);
        let b = distinct_sample(&mut rng, m, &mut taken);

        let ours = mann_whitney_u(&a, &b).unwrap();
        let brute = brute_force_p(&a, &b);
        assert!(
            (ours.p_value - brute).abs() < 1e-12,
            "dataset {dataset}: {} vs {brute} (n={n}, m={m})",
            ours.p_value
        );
    }
}

#[test]
fn single_element_samples_still_enumerate_exactly() {
    let s = mann_whitney_u(&[1.0], &[2.0]).unwrap();
    // two labelings, both tails equally extreme: p = 1
    assert!((s.p_value - 1.0).abs() < 1e-12);
    assert_eq!(s.u_statistic, 0.0);
}

#[test]
fn u_statistics_always_complement() {
    let mut rng = ChaCha8Rng::seed_from_u64(2718);
    for _ in 0..100 {
        let n = rng.gen_range(1..=20usize);
        let m = rng.gen_range(1..=20usize);
        // duplicates allowed: the complement identity must hold through ties
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0..8) as f64).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.gen_range(1..9) as f64).collect();
        let ab = mann_whitney_u(&a, &b).unwrap();
        let ba = mann_whitney_u(&b, &a).unwrap();
        assert_eq!(ab.u_statistic + ba.u_statistic, (n * m) as f64);
    }
}

#[test]
fn zscore_matches_independent_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let values: Vec<f64> = (0..200).map(|_| rng.gen_range(-4.0..9.0)).collect();
    let z = zscore(&values).unwrap();

    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let std =
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt();
    for (zi, vi) in z.iter().zip(&values) {
        assert!((zi - (vi - mean) / std).abs() < 1e-12);
    }
    let zmean = z.iter().sum::<f64>() / z.len() as f64;
    let zstd = (z.iter().map(|v| (v - zmean).powi(2)).sum::<f64>() / (z.len() - 1) as f64).sqrt();
    assert!(zmean.abs() < 1e-12);
    assert!((zstd - 1.0).abs() < 1e-12);
}

#[test]
fn error_rate_matches_recount_on_random_labels() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let labels = ["a", "b", "c"];
    let pred: Vec<&str> = (0..1000).map(|_| labels[rng.gen_range(0..3)]).collect();
    let truth: Vec<&str> = (0..1000).map(|_| labels[rng.gen_range(0..3)]).collect();
    let er = error_rate(&pred, &truth).unwrap();
    let mut mismatches = 0usize;
    for i in 0..1000 {
        if pred[i] != truth[i] {
            mismatches += 1;
        }
    }
    assert_eq!(er, mismatches as f64 / 1000.0);
}

#[test]
fn pca_captured_variance_matches_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for trial in 0..20 {
        let n = rng.gen_range(12..40usize);
        let dim = 10;
        // anisotropic data so the spectrum has structure
        let scales: Vec<f64> = (0..dim)
            .map(|d| 0.2 + 1.7 * (d as f64 + 1.0) / dim as f64)
            .collect();
        let data: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..dim)
                    .map(|d| scales[d] * rng.gen_range(-1.0..1.0f64) + (d as f64) * 0.1)
                    .collect()
            })
            .collect();

        let coords = pca_project(&data, 2).unwrap();
        // variance captured by the projection, sample convention
        let captured: f64 = (0..2)
            .map(|j| {
                let mean = coords.iter().map(|c| c[j]).sum::<f64>() / n as f64;
                coords.iter().map(|c| (c[j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            })
            .sum();

        // independent eigensolver on the sample covariance
        let mean: Vec<f64> = (0..dim)
            .map(|d| data.iter().map(|row| row[d]).sum::<f64>() / n as f64)
            .collect();
        let mut cov = DMatrix::<f64>::zeros(dim, dim);
        for row in &data {
            for a in 0..dim {
                for b in 0..dim {
                    cov[(a, b)] += (row[a] - mean[a]) * (row[b] - mean[b]) / (n as f64 - 1.0);
                }
            }
        }
        let mut eigenvalues: Vec<f64> = cov.symmetric_eigen().eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(|x, y| y.partial_cmp(x).unwrap());
        let expected = eigenvalues[0] + eigenvalues[1];

        assert!(
            (captured - expected).abs() < 1e-8,
            "trial {trial}: captured {captured} vs eigensum {expected}"
        );
    }
}

#[test]
fn pca_components_are_orthonormal_directions() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let data: Vec<Vec<f64>> = (0..30)
        .map(|_| (0..5).map(|_| rng.gen_range(-3.0..3.0f64)).collect())
        .collect();
    let coords = pca_project(&data, 2).unwrap();
    assert_eq!(coords.len(), 30);
    assert!(coords.iter().all(|c| c.len() == 2));
}
