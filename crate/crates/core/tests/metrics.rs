mod common;

use advjudge_core::metrics::{auc, confusion, f1_score, precision_recall_f1, roc_curve, ConfusionCounts};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn f1_from_reported_precision_and_recall() {
    // Hand evaluation: 2 * 0.92 * 0.94 / 1.86.
    let f1 = f1_score(0.92, 0.94);
    assert!((f1 - 1.7296 / 1.86).abs() < 1e-15);
    assert!((f1 - 0.92989).abs() < 5e-6);
}

#[test]
fn all_correct_has_no_errors() {
    let truths = [true, false, true, true, false];
    let c = confusion(&truths, &truths).unwrap();
    assert_eq!((c.fp, c.fn_), (0, 0));
    assert_eq!(c.total(), 5);
}

#[test]
fn hand_curves() {
    assert_eq!(auc(&[(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]).unwrap(), 1.0);
    assert_eq!(auc(&[(0.0, 0.0), (0.5, 0.5), (1.0, 1.0)]).unwrap(), 0.5);
}

#[test]
fn uninformative_scores_give_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let scores: Vec<f64> = (0..2000).map(|_| rng.random()).collect();
    let truths: Vec<bool> = (0..2000).map(|_| rng.random_bool(0.5)).collect();
    let a = roc_curve(&scores, &truths).unwrap().auc;
    assert!((a - 0.5).abs() <= 0.03, "auc {a}");
}

#[test]
fn degenerate_flag_instead_of_nan() {
    let m = precision_recall_f1(&ConfusionCounts { tp: 0, fp: 0, tn: 4, fn_: 2 });
    assert!(m.degenerate);
    assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    // Coarse score grid so ties are common.
    prop::collection::vec((0u8..12, any::<bool>()), 2..500)
        .prop_filter("both classes", |v| v.iter().any(|x| x.1) && v.iter().any(|x| !x.1))
        .prop_map(|v| v.into_iter().map(|(s, t)| (s as f64 / 4.0, t)).unzip())
}

proptest! {
    #[test]
    fn trapezoid_matches_pairwise_auc((scores, truths) in instance()) {
        let curve = roc_curve(&scores, &truths).unwrap();
        prop_assert!((curve.auc - common::mann_whitney_auc(&scores, &truths)).abs() <= 1e-9);
        prop_assert_eq!(curve.points[0], (0.0, 0.0));
        prop_assert_eq!(*curve.points.last().unwrap(), (1.0, 1.0));
        for w in curve.points.windows(2) {
            prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn negated_scores_flip_auc((scores, truths) in instance()) {
        let a = roc_curve(&scores, &truths).unwrap().auc;
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let b = roc_curve(&neg, &truths).unwrap().auc;
        prop_assert!((a + b - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn f1_bounds(tp in 0usize..50, fp in 0usize..50, tn in 0usize..50, fn_ in 0usize..50) {
        let m = precision_recall_f1(&ConfusionCounts { tp, fp, tn, fn_ });
        let (p, r) = (m.precision, m.recall);
        prop_assert!(m.f1 <= (p + r) / 2.0 + 1e-12);
        prop_assert!(m.f1 <= 2.0 * p.min(r) + 1e-12);
        if p > 0.0 && r > 0.0 {
            prop_assert!(m.f1 >= p.min(r) - 1e-12);
        }
        prop_assert!((0.0..=1.0).contains(&m.f1));
    }
}
