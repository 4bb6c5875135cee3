use cardfraud::models::{build_cnn1d, build_cnn2d, build_lstm, cnn1d_layers, cnn2d_layers};
use cardfraud::nn::{infer_shapes, Activation, Layer, LayerSpec, Mode, Network};
use cardfraud::seed;

#[test]
fn cnn2d_shapes_on_a_five_by_six_grid() {
    let shapes = infer_shapes(&[30], &cnn2d_layers(30, [5, 6]).unwrap()).unwrap();
    assert!(shapes.contains(&vec![3, 4, 64]));
    assert!(shapes.contains(&vec![1, 2, 32]));
    assert!(shapes.contains(&vec![64]));
    assert_eq!(shapes.last().unwrap(), &vec![1]);
}

#[test]
fn cnn1d_flattens_to_64() {
    let shapes = infer_shapes(&[30], &cnn1d_layers(30).unwrap()).unwrap();
    assert!(shapes.contains(&vec![64]));
    assert_eq!(shapes.last().unwrap(), &vec![1]);
}

#[test]
fn parameter_counts_follow_the_layer_sizes() {
    // conv 3·3·1·64+64, conv 3·3·64·32+32, dense 64+1
    assert_eq!(build_cnn2d::<f64>(30, 0).unwrap().n_params(), 640 + 18464 + 65);
    for d in [7, 11, 30] {
        let cnn1d = (d * 64 + 64) + (64 * 64 + 64) + (64 * 100 + 100) + 101;
        assert_eq!(build_cnn1d::<f64>(d, 0).unwrap().n_params(), cnn1d, "cnn1d d={d}");
        let lstm = 4 * (50 * (50 + d) + 50) + 51;
        assert_eq!(build_lstm::<f64>(d, 0).unwrap().n_params(), lstm, "lstm d={d}");
    }
}

#[test]
fn outputs_are_probabilities() {
    let mut rng = seed::rng(3);
    use rand::Rng;
    for net in [
        build_cnn2d::<f64>(30, 5).unwrap(),
        build_cnn1d(30, 5).unwrap(),
        build_lstm(30, 5).unwrap(),
    ] {
        for _ in 0..20 {
            let row: Vec<f64> = (0..30).map(|_| rng.random::<f64>() * 20.0 - 10.0).collect();
            let p = net.predict_proba(&row).unwrap();
            assert!(p > 0.0 && p < 1.0, "{p}");
        }
    }
}

#[test]
fn cnn1d_inference_ignores_dropout() {
    let net = build_cnn1d::<f64>(12, 8).unwrap();
    let row: Vec<f64> = (0..12).map(|i| i as f64 / 5.0 - 1.0).collect();
    let a = net.forward(&row, Mode::Infer, &mut seed::rng(1)).unwrap().0;
    let b = net.forward(&row, Mode::Infer, &mut seed::rng(2)).unwrap().0;
    assert_eq!(a, b);
}

#[test]
fn zero_lstm_outputs_one_half() {
    let mut net = build_lstm::<f64>(7, 1).unwrap();
    for p in net.params_mut() {
        p.iter_mut().for_each(|v| *v = 0.0);
    }
    assert_eq!(net.predict_proba(&[0.3; 7]).unwrap(), 0.5);
    match &net.layers()[1] {
        Layer::Lstm { params, inner } => {
            assert_eq!(params.hidden, 50);
            assert_eq!(*inner, Activation::Relu);
        }
        other => panic!("expected lstm, found {}", other.name()),
    }
}

#[test]
fn mismatched_compositions_are_rejected() {
    assert!(cnn2d_layers(11, [5, 6]).is_err());
    let bad = [LayerSpec::Conv2d { channels: 4, kernel: 3, activation: None }];
    assert!(infer_shapes(&[2, 2, 1], &bad).is_err());
    assert!(Network::<f64>::build(&[4], &[LayerSpec::dense(3, None)], 0).is_err());
}
