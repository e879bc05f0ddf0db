//! Property tests for the contract invariants of the pure modules.

use std::collections::BTreeMap;

use proptest::prelude::*;

use stereoclust_core::channel::{combine, CombinationMethod, StereoSegment};
use stereoclust_core::experiment::{split_train_test, SplitPlan};
use stereoclust_core::stats::{mann_whitney_u, pca_project, zscore};

fn sample_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len..=len)
}

proptest! {
    #[test]
    fn sumdif_reconstructs_both_channels(
        left in sample_vec(64),
        right in sample_vec(64),
    ) {
        let seg = StereoSegment::new("s".into(), 1, left.clone(), right.clone(), 64).unwrap();
        let out = combine(&seg, CombinationMethod::Sumdif).samples;
        let (sum, dif) = out.split_at(64);
        for i in 0..64 {
            let l = (sum[i] + dif[i]) / 2.0;
            let r = (sum[i] - dif[i]) / 2.0;
            // samples live in [-1, 1]; one ulp at that scale is f64::EPSILON
            prop_assert!((l - left[i]).abs() <= f64::EPSILON);
            prop_assert!((r - right[i]).abs() <= f64::EPSILON);
        }
    }

    #[test]
    fn power_of_two_scaling_commutes_with_combination(
        left in sample_vec(16),
        right in sample_vec(16),
        exp in -3i32..=3,
    ) {
        let scale = (2.0f64).powi(exp);
        let seg = StereoSegment::new("s".into(), 1, left.clone(), right.clone(), 16).unwrap();
        let scaled = StereoSegment::new(
            "s".into(),
            1,
            left.iter().map(|v| v * scale).collect(),
            right.iter().map(|v| v * scale).collect(),
            16,
        )
        .unwrap();
        for method in [CombinationMethod::Mono, CombinationMethod::Sum, CombinationMethod::Sumdif] {
            let direct = combine(&scaled, method).samples;
            let after: Vec<f64> = combine(&seg, method).samples.iter().map(|v| v * scale).collect();
            prop_assert_eq!(direct, after);
        }
    }

    #[test]
    fn general_scaling_commutes_within_rounding(
        left in sample_vec(16),
        right in sample_vec(16),
        scale in 0.1f64..10.0,
    ) {
        let seg = StereoSegment::new("s".into(), 1, left.clone(), right.clone(), 16).unwrap();
        let scaled = StereoSegment::new(
            "s".into(),
            1,
            left.iter().map(|v| v * scale).collect(),
            right.iter().map(|v| v * scale).collect(),
            16,
        )
        .unwrap();
        let direct = combine(&scaled, CombinationMethod::Sum).samples;
        let after: Vec<f64> = combine(&seg, CombinationMethod::Sum)
            .samples
            .iter()
            .map(|v| v * scale)
            .collect();
        for i in 0..16 {
            // rounding is relative to the operand magnitudes, which matters
            // when the channels nearly cancel
            let tol = 4.0 * f64::EPSILON * scale * (left[i].abs() + right[i].abs());
            prop_assert!((direct[i] - after[i]).abs() <= tol);
        }
    }

    #[test]
    fn split_is_a_partition(t in 2usize..100, seed in any::<u64>(), run in 0usize..20) {
        let mut indices = BTreeMap::new();
        indices.insert("s".to_string(), (1..=t).collect::<Vec<usize>>());
        let plan = SplitPlan { rng_seed: seed, ..SplitPlan::default() };
        let split = split_train_test(&indices, &plan, run).unwrap();
        let (train, test) = &split["s"];

        prop_assert!(!train.is_empty());
        prop_assert!(!test.is_empty());
        prop_assert_eq!(train.len(), ((0.7 * t as f64).floor() as usize).clamp(1, t - 1));
        let mut union: Vec<usize> = train.iter().chain(test.iter()).copied().collect();
        union.sort_unstable();
        prop_assert_eq!(union, (1..=t).collect::<Vec<usize>>());
    }

    #[test]
    fn zscore_is_invariant_under_positive_affine_maps(
        values in prop::collection::vec(-50.0f64..50.0, 3..40),
        scale in 0.01f64..100.0,
        shift in -100.0f64..100.0,
    ) {
        prop_assume!(zscore(&values).is_ok());
        let mapped: Vec<f64> = values.iter().map(|v| v * scale + shift).collect();
        prop_assume!(zscore(&mapped).is_ok());
        let z0 = zscore(&values).unwrap();
        let z1 = zscore(&mapped).unwrap();
        for (a, b) in z0.iter().zip(&z1) {
            prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn mwu_u_complement_property(
        a in prop::collection::vec(-5.0f64..5.0, 1..15),
        b in prop::collection::vec(-5.0f64..5.0, 1..15),
    ) {
        let ab = mann_whitney_u(&a, &b);
        let ba = mann_whitney_u(&b, &a);
        prop_assume!(ab.is_ok()); // both err together only on degenerate input
        let (ab, ba) = (ab.unwrap(), ba.unwrap());
        prop_assert_eq!(ab.u_statistic + ba.u_statistic, (a.len() * b.len()) as f64);
        prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
        prop_assert!((0.0..=(a.len() * b.len()) as f64).contains(&ab.u_statistic));
    }
}

#[test]
fn pca_is_stable_under_input_reordering() {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // distinct per-axis scales keep the eigengaps healthy
    let data: Vec<Vec<f64>> = (0..40)
        .map(|_| {
            (0..6)
                .map(|d| (d as f64 + 1.0) * rng.gen_range(-1.0..1.0f64))
                .collect()
        })
        .collect();
    let coords = pca_project(&data, 2).unwrap();

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let reordered: Vec<Vec<f64>> = order.iter().map(|&i| data[i].clone()).collect();
    let reordered_coords = pca_project(&reordered, 2).unwrap();

    for (new_pos, &old_pos) in order.iter().enumerate() {
        for j in 0..2 {
            let delta = (coords[old_pos][j] - reordered_coords[new_pos][j]).abs();
            assert!(delta < 1e-8, "coordinate moved by {delta}");
        }
    }
}
