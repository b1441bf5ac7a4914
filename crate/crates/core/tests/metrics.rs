use gad_core::metrics::{auroc, average_precision, evaluate, precision_at_k, recall_at_k};
use proptest::prelude::*;

/// Scores from a small alphabet so ties are frequent.
fn instance(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec((0i32..6).prop_map(|v| v as f64 * 0.5), n),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

fn both_classes(y: &[bool]) -> bool {
    y.iter().any(|&b| b) && y.iter().any(|&b| !b)
}

/// Fraction of (positive, negative) pairs ranked correctly, ties worth half.
fn pair_count_auroc(s: &[f64], y: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if y[i] && !y[j] {
                pairs += 1.0;
                if s[i] > s[j] {
                    wins += 1.0;
                } else if s[i] == s[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Σ over distinct thresholds t (descending) of (R_t − R_prev)·P_t.
fn definitional_ap(s: &[f64], y: &[bool]) -> f64 {
    let pos = y.iter().filter(|&&b| b).count() as f64;
    let mut thresholds: Vec<f64> = s.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let (mut ap, mut prev_recall) = (0.0, 0.0);
    for t in thresholds {
        let sel: Vec<usize> = (0..s.len()).filter(|&i| s[i] >= t).collect();
        let tp = sel.iter().filter(|&&i| y[i]).count() as f64;
        let recall = tp / pos;
        ap += (recall - prev_recall) * (tp / sel.len() as f64);
        prev_recall = recall;
    }
    ap
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn auroc_matches_pair_counting((s, y) in instance(12)) {
        prop_assume!(both_classes(&y));
        prop_assert!((auroc(&s, &y).unwrap() - pair_count_auroc(&s, &y)).abs() <= 1e-12);
    }

    #[test]
    fn ap_matches_definitional_sum((s, y) in instance(12)) {
        prop_assume!(both_classes(&y));
        prop_assert!((average_precision(&s, &y).unwrap() - definitional_ap(&s, &y)).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn recall_equals_precision_at_num_pos((s, y) in instance(40)) {
        prop_assume!(both_classes(&y));
        let k = y.iter().filter(|&&b| b).count();
        prop_assert_eq!(recall_at_k(&s, &y, k).unwrap(), precision_at_k(&s, &y, k).unwrap());
    }

    #[test]
    fn strictly_increasing_transform_is_invariant((s, y) in instance(40)) {
        prop_assume!(both_classes(&y));
        let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        prop_assert_eq!(evaluate(&s, &y).unwrap(), evaluate(&t, &y).unwrap());
    }

    #[test]
    fn negated_scores_complement_auroc(
        y in prop::collection::vec(any::<bool>(), 2..40),
        seed in any::<u64>(),
    ) {
        prop_assume!(both_classes(&y));
        use rand::{seq::SliceRandom, SeedableRng};
        let mut s: Vec<f64> = (0..y.len()).map(|i| i as f64).collect();
        s.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert!((auroc(&s, &y).unwrap() + auroc(&neg, &y).unwrap() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn anomalies_ranked_eleventh_to_twentieth() {
    let n = 1000;
    let s: Vec<f64> = (0..n).map(|i| (n - i) as f64).collect();
    let y: Vec<bool> = (0..n).map(|i| (10..20).contains(&i)).collect();
    let r = evaluate(&s, &y).unwrap();
    // 10 positives each beaten by 10 of 990 negatives.
    assert!((r.auroc - 980.0 / 990.0).abs() < 1e-12);
    let ap: f64 = (1..=10).map(|i| i as f64 / (10 + i) as f64).sum::<f64>() / 10.0;
    assert!((r.auprc - ap).abs() < 1e-12);
    assert_eq!(r.rec_at_k, 0.0);
    assert_eq!(r.k, 10);
}
