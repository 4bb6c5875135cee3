mod common;

use cardfraud::metrics::{confusion, evaluate, metrics, Score};
use common::oracles::{count_metrics, metric_mismatches, report_matches};
use proptest::prelude::*;

#[test]
fn formulas_match_counting_on_random_vectors() {
    assert_eq!(metric_mismatches(10_000, 42), 0);
}

#[test]
fn all_negative_predictor() {
    let y = [0, 1, 0, 1, 1, 0];
    let r = evaluate(&y, &[0; 6]).unwrap();
    assert_eq!(r.recall, Score::Defined(0.0));
    assert_eq!(r.precision, Score::Undefined);
    assert_eq!(r.f1, Score::Undefined);
    assert_eq!(r.accuracy, 0.5);
}

#[test]
fn perfect_predictor() {
    let y = [0, 1, 1, 0, 1];
    let r = evaluate(&y, &y).unwrap();
    for s in [r.precision, r.recall, r.f1] {
        assert_eq!(s, Score::Defined(1.0));
    }
    assert_eq!(r.accuracy, 1.0);
}

#[test]
fn rejects_bad_input() {
    assert!(evaluate(&[0, 1], &[0]).is_err());
    assert!(evaluate(&[], &[]).is_err());
    assert!(evaluate(&[2], &[0]).is_err());
}

fn labels() -> impl Strategy<Value = (Vec<u8>, Vec<u8>)> {
    (1usize..200).prop_flat_map(|n| {
        (
            proptest::collection::vec(0u8..2, n),
            proptest::collection::vec(0u8..2, n),
        )
    })
}

proptest! {
    #[test]
    fn matches_counting((y, p) in labels()) {
        let r = evaluate(&y, &p).unwrap();
        prop_assert!(report_matches(&r, &count_metrics(&y, &p), 1e-12));
        prop_assert_eq!(r.tp + r.tn + r.fp + r.fn_, y.len());
    }

    #[test]
    fn f1_lies_between_min_and_max((y, p) in labels()) {
        let r = evaluate(&y, &p).unwrap();
        if let (Some(a), Some(b), Some(f)) = (r.precision.value(), r.recall.value(), r.f1.value()) {
            prop_assert!(f >= a.min(b) - 1e-12 && f <= a.max(b) + 1e-12);
        }
        prop_assert!((0.0..=1.0).contains(&r.accuracy));
    }

    #[test]
    fn swapping_the_positive_class((y, p) in labels()) {
        let flip = |v: &[u8]| v.iter().map(|&x| 1 - x).collect::<Vec<u8>>();
        let cm = confusion(&y, &p).unwrap();
        let swapped = metrics(&cm.swapped()).unwrap();
        let direct = evaluate(&flip(&y), &flip(&p)).unwrap();
        prop_assert_eq!(swapped, direct);
        prop_assert_eq!(swapped.accuracy, evaluate(&y, &p).unwrap().accuracy);
    }
}
