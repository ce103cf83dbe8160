mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tomtalk_core::emotion::Emotion;
use tomtalk_core::perception::*;

fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn random_tensor(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Tensor {
    Tensor::from_fn(h, w, c, |_, _, _| rng.random::<f64>() * 2.0 - 1.0)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}

#[test]
fn golden_forward_pass() {
    let spec = NetworkSpec::load(fixture("recognizer.weights")).unwrap();
    assert_eq!(spec.widths(), DEFAULT_WIDTHS.to_vec());
    let image = read_pgm(&std::fs::read_to_string(fixture("face.pgm")).unwrap()).unwrap();
    let golden: Vec<f64> = std::fs::read_to_string(fixture("recognizer_golden.txt"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .flat_map(|l| l.split_whitespace().map(|t| t.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .collect();
    let c = classify(&image, &spec).unwrap();
    for (got, want) in c.probabilities.iter().zip(&golden) {
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }
    assert_eq!(c.emotion, Emotion::Disgust);
}

#[test]
fn missing_weights_file_names_path() {
    let err = NetworkSpec::load("/nonexistent/w.weights").unwrap_err();
    assert!(err.to_string().contains("/nonexistent/w.weights"));
}

#[test]
fn separable_matches_rank_one_full_conv() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let cout = 1 + rng.random_range(0..5);
        let input = random_tensor(&mut rng, 8, 8, 3);
        let dw = DepthwiseKernel {
            size: 3,
            channels: 3,
            weights: random_vec(&mut rng, 27),
        };
        let pw = PointwiseKernel {
            c_in: 3,
            c_out: cout,
            weights: random_vec(&mut rng, 3 * cout),
        };
        let sep = depthwise_separable_conv(&input, &dw, &pw, Padding::Same).unwrap();
        let full = common::rank_one_kernel(&dw.weights, &pw.weights, 3, 3, cout);
        let oracle = common::naive_conv_same(&input, &full);
        for (a, b) in sep.data().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-6);
        }
        // the library's full convolution agrees with the same oracle
        let flat: Vec<f64> = full.iter().flatten().flatten().flatten().copied().collect();
        let k = ConvKernel {
            size: 3,
            c_in: 3,
            c_out: cout,
            weights: flat,
        };
        let lib_full = conv2d(&input, &k, Padding::Same).unwrap();
        for (a, b) in lib_full.data().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn batchnorm_with_batch_statistics_standardizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = Tensor::from_fn(16, 16, 3, |_, _, c| rng.random::<f64>() * (c + 1) as f64 + c as f64);
    let n = 256.0;
    let mut mean = vec![0.0; 3];
    let mut var = vec![0.0; 3];
    for c in 0..3 {
        let vals: Vec<f64> = (0..256).map(|i| x.get(i / 16, i % 16, c)).collect();
        mean[c] = vals.iter().sum::<f64>() / n;
        var[c] = vals.iter().map(|v| (v - mean[c]).powi(2)).sum::<f64>() / n;
    }
    let bn = BatchNorm {
        gamma: vec![1.0; 3],
        beta: vec![0.0; 3],
        mean,
        variance: var,
    };
    let y = batchnorm_infer(&x, &bn, BN_EPSILON).unwrap();
    for c in 0..3 {
        let vals: Vec<f64> = (0..256).map(|i| y.get(i / 16, i % 16, c)).collect();
        let m = vals.iter().sum::<f64>() / n;
        let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
        assert!(m.abs() < 1e-6);
        assert!((sd - 1.0).abs() < 1e-3);
    }
}

#[test]
fn residual_recovers_linear_branch() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let x = random_tensor(&mut rng, 5, 5, 4);
        let pw = PointwiseKernel {
            c_in: 4,
            c_out: 4,
            weights: random_vec(&mut rng, 16),
        };
        let h = residual_apply(&x, |t| pointwise_conv(t, &pw), None).unwrap();
        let f = pointwise_conv(&x, &pw).unwrap();
        assert!(h.sub(&x).unwrap().max_abs_diff(&f) < 1e-9);
    }
}

#[test]
fn noisy_channel_reproduces_anchor_cells() {
    let m = ConfusionMatrix::bundled();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let n = 100_000;
    for (truth, want) in [(Emotion::Happy, 0.83), (Emotion::Fear, 0.42)] {
        let hits = (0..n)
            .filter(|_| noisy_recognize(truth, &m, &mut rng) == truth)
            .count();
        assert!((hits as f64 / n as f64 - want).abs() < 0.01);
    }
}

#[test]
fn confusion_file_errors() {
    let err = ConfusionMatrix::load("/nope/confusion.csv").unwrap_err();
    assert!(err.to_string().contains("/nope/confusion.csv"));
    let text = "predicted,anger,disgust,fear,happy,sad,surprise,neutral\n\
                anger,1,0,0,0,0,0,0\ndisgust,0,1,0,0,0,0,0\nfear,0,0,1,0,0,0,0\n\
                happy,0,0,0,1,0,0,0\nsad,0,0,0,0,1,0,0\nsurprise,0,0,0,0,0,1,0\n";
    assert!(ConfusionMatrix::from_csv(text).is_err());
}

proptest! {
    #[test]
    fn softmax_is_positive_normalized_and_shift_invariant(
        logits in prop::collection::vec(-30.0f64..30.0, 1..12),
        shift in -100.0f64..100.0,
    ) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|v| *v > 0.0));
        let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
        for (a, b) in p.iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn parameter_ratio_formula(k in 1usize..8, cin in 1usize..64, cout in 1usize..64) {
        let sep = separable_param_count(k, cin, cout) as f64;
        let full = full_conv_param_count(k, cin, cout) as f64;
        let formula = 1.0 / cout as f64 + 1.0 / (k * k) as f64;
        prop_assert!((sep / full - formula).abs() <= 4.0 * f64::EPSILON * formula);
    }

    #[test]
    fn batchnorm_is_affine_in_input(
        a in -3.0f64..3.0, b in -3.0f64..3.0,
        gamma in 0.1f64..2.0, var in 0.01f64..4.0, mean in -1.0f64..1.0,
        xs in prop::collection::vec(-5.0f64..5.0, 4),
    ) {
        let bn = BatchNorm { gamma: vec![gamma], beta: vec![0.3], mean: vec![mean], variance: vec![var] };
        let x = Tensor::new(2, 2, 1, xs).unwrap();
        let y = batchnorm_infer(&x, &bn, BN_EPSILON).unwrap();
        let y2 = batchnorm_infer(&x.map(|v| a * v + b), &bn, BN_EPSILON).unwrap();
        let slope = gamma / (var + BN_EPSILON).sqrt();
        // y2 - a*y is the same constant everywhere
        let offset = y2.data()[0] - a * y.data()[0];
        for (p, q) in y.data().iter().zip(y2.data()) {
            prop_assert!((q - a * p - offset).abs() < 1e-9);
        }
        let expected_offset = slope * (b + (a - 1.0) * mean) + (1.0 - a) * 0.3;
        prop_assert!((offset - expected_offset).abs() < 1e-9);
    }
}
