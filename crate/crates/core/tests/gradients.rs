mod common;

use cardfraud::models::{build_cnn1d, build_cnn2d, build_logreg, build_lstm};
use common::gradcheck::{check_kind, check_network, LAYER_KINDS, TOLERANCE};

#[test]
fn every_layer_kind_matches_finite_differences() {
    let mut failures = Vec::new();
    for (i, kind) in LAYER_KINDS.iter().enumerate() {
        let err = check_kind(kind, 20, 1000 + i as u64);
        println!("{kind:>14} max rel err {err:.2e}");
        if err.is_nan() || err >= TOLERANCE {
            failures.push(format!("{kind}: {err:e}"));
        }
    }
    assert!(failures.is_empty(), "gradient mismatches: {failures:?}");
}

#[test]
fn full_networks_match_finite_differences() {
    let nets = [
        ("cnn2d", build_cnn2d(30, 1).unwrap()),
        ("cnn1d", build_cnn1d(7, 2).unwrap()),
        ("lstm", build_lstm(7, 3).unwrap()),
        ("logreg", build_logreg(7, 4).unwrap()),
    ];
    for (name, mut net) in nets {
        let err = check_network(&mut net, 150, 9);
        assert!(err < TOLERANCE, "{name}: {err:e}");
    }
}
