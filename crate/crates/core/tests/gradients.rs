mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use radguard::network::Dense;
use radguard::{Activation, Layer, Network};

const H: f64 = 1e-4;

#[test]
fn two_four_two_net() {
    for (seed, act) in Activation::ALL.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
        let layers = vec![
            Layer::Dense(random_dense(&mut rng, 2, 4)),
            Layer::Activation(act),
            Layer::Dense(random_dense(&mut rng, 4, 2)),
        ];
        let net = Network::new(vec![2], layers, 2).unwrap();
        for t in 0..2 {
            let x = random_input(&mut rng, 2);
            let (err, compared, _) = gradient_check(&net, &x, t, H);
            assert!(compared > 0);
            assert!(err <= 1e-4, "{act}: {err}");
        }
    }
}

#[test]
fn mlps_of_every_activation() {
    for seed in 0..30u64 {
        let act = Activation::ALL[seed as usize % 3];
        let net = random_mlp(seed, act);
        let x = random_input(&mut ChaCha8Rng::seed_from_u64(seed + 1000), net.input_len());
        let (err, _, skipped) = gradient_check(&net, &x, seed as usize % net.label_count(), H);
        assert!(err <= 1e-4, "seed {seed} {act}: {err}");
        assert!(skipped <= 1, "seed {seed}: {skipped} kinks");
    }
}

#[test]
fn conv_and_pool_nets() {
    for seed in 0..12u64 {
        let act = Activation::ALL[seed as usize % 3];
        let net = random_cnn(seed, act);
        let x = random_input(&mut ChaCha8Rng::seed_from_u64(seed + 2000), net.input_len());
        let (err, compared, skipped) = gradient_check(&net, &x, seed as usize % 3, H);
        assert!(compared > net.input_len() / 2, "seed {seed}: compared {compared}");
        assert!(err <= 1e-4, "seed {seed} {act}: {err}");
        assert!(skipped <= 2, "seed {seed}: {skipped} kinks");
    }
}

#[test]
fn strided_conv_without_padding() {
    use radguard::network::Conv2d;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let conv = Conv2d {
        in_channels: 1,
        out_channels: 2,
        kernel: [2, 3],
        stride: 2,
        padding: 0,
        weights: (0..12).map(|i| (i as f64 * 0.37).sin()).collect(),
        bias: vec![0.1, -0.2],
    };
    // [1, 5, 7] → [2, 2, 3]
    let layers = vec![Layer::Conv2d(conv), Layer::Activation(Activation::Tanh), Layer::Dense(random_dense(&mut rng, 12, 3))];
    let net = Network::new(vec![1, 5, 7], layers, 3).unwrap();
    let x = random_input(&mut rng, 35);
    let (err, compared, _) = gradient_check(&net, &x, 1, H);
    assert!(compared > 20);
    assert!(err <= 1e-4, "{err}");
}

#[test]
fn dense_layout_is_outputs_by_inputs() {
    let net = Network::new(
        vec![2],
        vec![Layer::Dense(Dense { inputs: 2, outputs: 2, weights: vec![1.0, 2.0, 3.0, 4.0], bias: vec![0.0, 0.0] })],
        2,
    )
    .unwrap();
    assert_eq!(net.scores(&[1.0, 0.0]).unwrap(), vec![1.0, 3.0]);
}
