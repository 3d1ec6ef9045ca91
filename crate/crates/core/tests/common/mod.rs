#![allow(dead_code)]

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use radguard::dataset::{gen_synthetic, SyntheticSpec};
use radguard::network::{Conv2d, Dense};
use radguard::train::{train_sgd, TrainConfig, TrainReport};
use radguard::{Activation, Dataset, Layer, Network};

/// Random dense layer with weights scaled by `1/sqrt(inputs)` and small biases.
pub fn random_dense(rng: &mut ChaCha8Rng, inputs: usize, outputs: usize) -> Dense {
    let scale = 1.5 / (inputs as f64).sqrt();
    Dense {
        inputs,
        outputs,
        weights: (0..inputs * outputs).map(|_| rng.gen_range(-scale..scale)).collect(),
        bias: (0..outputs).map(|_| rng.gen_range(-0.3..0.3)).collect(),
    }
}

/// MLP with 1 to 3 hidden layers of 2 to 32 units.
pub fn random_mlp(seed: u64, activation: Activation) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = rng.gen_range(2..=8);
    let labels = rng.gen_range(2..=5);
    let hidden = rng.gen_range(1..=3);
    let mut layers = Vec::new();
    let mut width = inputs;
    for _ in 0..hidden {
        let next = rng.gen_range(2..=32);
        layers.push(Layer::Dense(random_dense(&mut rng, width, next)));
        layers.push(Layer::Activation(activation));
        width = next;
    }
    layers.push(Layer::Dense(random_dense(&mut rng, width, labels)));
    Network::new(vec![inputs], layers, labels).expect("consistent random net")
}

/// Small conv net: conv(3x3, pad 1) → act → maxpool 2 → dense → act → dense.
pub fn random_cnn(seed: u64, activation: Activation) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, h, w, f) = (2, 6, 6, 3);
    let fan_in = (c * 9) as f64;
    let conv = Conv2d {
        in_channels: c,
        out_channels: f,
        kernel: [3, 3],
        stride: 1,
        padding: 1,
        weights: (0..f * c * 9).map(|_| rng.gen_range(-1.0..1.0) / fan_in.sqrt()).collect(),
        bias: (0..f).map(|_| rng.gen_range(-0.2..0.2)).collect(),
    };
    let pooled = f * (h / 2) * (w / 2);
    let layers = vec![
        Layer::Conv2d(conv),
        Layer::Activation(activation),
        Layer::MaxPool2d { window: [2, 2] },
        Layer::Dense(random_dense(&mut rng, pooled, 8)),
        Layer::Activation(activation),
        Layer::Dense(random_dense(&mut rng, 8, 3)),
    ];
    Network::new(vec![c, h, w], layers, 3).expect("consistent random cnn")
}

pub fn random_input(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()
}

pub const FIXTURE_DATA: SyntheticSpec = SyntheticSpec { classes: 4, dims: 10, per_class: 1000, spread: 0.1, seed: 1 };
pub const FIXTURE_TRAIN: usize = 2000;
pub const FIXTURE_CALIBRATION: usize = 600;

/// Trained desk-scale network with disjoint train, calibration and test sets.
pub struct Fixture {
    pub net: Network,
    pub report: TrainReport,
    pub calibration: Dataset,
    pub test: Dataset,
    pub train_time: Duration,
}

pub fn fixture() -> Fixture {
    let start = Instant::now();
    let data = gen_synthetic(FIXTURE_DATA).expect("fixture data");
    let (train, rest) = data.split_at(FIXTURE_TRAIN);
    let (calibration, test) = rest.split_at(FIXTURE_CALIBRATION);
    let config = TrainConfig {
        architecture: "32,32,4".parse().unwrap(),
        activation: Activation::Relu,
        epochs: 30,
        learning_rate: 0.05,
        batch_size: 32,
        seed: 1,
    };
    let (net, report) = train_sgd(&train, Some(&test), &config).expect("fixture training");
    Fixture { net, report, calibration, test, train_time: start.elapsed() }
}

/// `q`-quantile by the lower nearest rank.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[((q * v.len() as f64) as usize).min(v.len() - 1)]
}

use radguard::network::{pool_groups, AffineMap};
use radguard::{Interval, Zonotope};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transformer {
    Affine,
    Relu,
    Sigmoid,
    Tanh,
    MaxPool,
}

impl Transformer {
    pub const ALL: [Transformer; 5] =
        [Transformer::Affine, Transformer::Relu, Transformer::Sigmoid, Transformer::Tanh, Transformer::MaxPool];
}

fn random_map(rng: &mut ChaCha8Rng, inputs: usize, outputs: usize) -> AffineMap {
    AffineMap {
        bias: (0..outputs).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        rows: (0..outputs)
            .map(|_| {
                let mut row = Vec::new();
                for j in 0..inputs {
                    if rng.gen_bool(0.7) {
                        row.push((j, rng.gen_range(-2.0..2.0)));
                    }
                }
                row
            })
            .collect(),
    }
}

fn apply_map(map: &AffineMap, x: &[f64]) -> Vec<f64> {
    map.rows.iter().zip(&map.bias).map(|(row, b)| b + row.iter().map(|&(j, w)| w * x[j]).sum::<f64>()).collect()
}

fn apply_pool(groups: &[Vec<usize>], x: &[f64]) -> Vec<f64> {
    groups.iter().map(|g| g.iter().map(|&i| x[i]).fold(f64::NEG_INFINITY, f64::max)).collect()
}

/// Whether `target` lies in `z`, given that the first `old` symbols took the
/// values `eps` and every later symbol belongs to a single dimension.
/// Exact for that structure, which all non-affine transformers produce.
pub fn contains_with_private_symbols(z: &Zonotope, old: usize, eps: &[f64], target: &[f64]) -> bool {
    for j in old..z.symbols() {
        let used = (0..z.dims()).filter(|&i| z.row(i)[j] != 0.0).count();
        assert!(used <= 1, "symbol {j} is shared by {used} dimensions");
    }
    (0..z.dims()).all(|i| {
        let row = z.row(i);
        let fixed: f64 = z.center()[i] + row[..old].iter().zip(eps).map(|(g, e)| g * e).sum::<f64>();
        let slack: f64 = row[old..].iter().map(|g| g.abs()).sum();
        (target[i] - fixed).abs() <= slack + 1e-9 * (1.0 + target[i].abs())
    })
}

fn sample_eps(rng: &mut ChaCha8Rng, k: usize, corner: bool) -> Vec<f64> {
    (0..k).map(|_| if corner { if rng.gen_bool(0.5) { 1.0 } else { -1.0 } } else { rng.gen_range(-1.0..=1.0) }).collect()
}

/// Runs `checks` random input regions through `t` in both domains, drawing
/// `samples` concrete points from each. Returns the number of concrete
/// images that escape the abstract output.
pub fn containment_escapes(t: Transformer, checks: usize, samples: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut escapes = 0;
    for _ in 0..checks {
        // Four pooling cells of a [1, 4, 4] tensor, or a plain vector.
        let n = if t == Transformer::MaxPool { 16 } else { rng.gen_range(1..=8) };
        let k = rng.gen_range(1..=6);
        let center: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let gens: Vec<f64> = (0..n * k).map(|_| if rng.gen_bool(0.8) { rng.gen_range(-1.0..1.0) } else { 0.0 }).collect();
        let z = Zonotope::new(center, gens, k).unwrap();
        let b = z.bounds();
        let groups = pool_groups(&[1, 4, 4], [2, 2]);
        let outputs = rng.gen_range(1..=8);
        let map = random_map(&mut rng, n, outputs);
        let concrete = |y: &[f64]| -> Vec<f64> {
            match t {
                Transformer::Affine => apply_map(&map, y),
                Transformer::Relu => y.iter().map(|&v| Activation::Relu.apply(v)).collect(),
                Transformer::Sigmoid => y.iter().map(|&v| Activation::Sigmoid.apply(v)).collect(),
                Transformer::Tanh => y.iter().map(|&v| Activation::Tanh.apply(v)).collect(),
                Transformer::MaxPool => apply_pool(&groups, y),
            }
        };
        let (zo, bo): (Zonotope, Interval) = match t {
            Transformer::Affine => (z.affine(&map), b.affine(&map)),
            Transformer::Relu => (z.activation(Activation::Relu), b.activation(Activation::Relu)),
            Transformer::Sigmoid => (z.activation(Activation::Sigmoid), b.activation(Activation::Sigmoid)),
            Transformer::Tanh => (z.activation(Activation::Tanh), b.activation(Activation::Tanh)),
            Transformer::MaxPool => (z.maxpool(&groups), b.maxpool(&groups)),
        };
        for s in 0..samples {
            let eps = sample_eps(&mut rng, k, s % 4 == 0);
            let y = z.evaluate(&eps);
            let image = concrete(&y);
            if !contains_with_private_symbols(&zo, k, &eps, &image) {
                escapes += 1;
            }
            // Interval: a uniform point of the input box.
            let p: Vec<f64> = b.lower().iter().zip(b.upper()).map(|(&l, &u)| if l < u { rng.gen_range(l..=u) } else { l }).collect();
            if !bo.contains(&concrete(&p), 1e-9) {
                escapes += 1;
            }
        }
    }
    escapes
}

/// Soundness sweep over random MLPs: certify a radius for each input, then
/// search the certified region for a label change. Returns
/// `(robust verdicts checked, violations)`.
pub fn soundness_violations(nets: usize, inputs: usize, trials: usize, seed: u64) -> (usize, usize) {
    use radguard::attacks::falsify;
    use radguard::{approximate_radius, Domain, SearchParams};
    let mut checked = 0;
    let mut violations = 0;
    for i in 0..nets {
        let net = random_mlp(seed + i as u64, Activation::ALL[i % 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37 + i as u64));
        for j in 0..inputs {
            let x = random_input(&mut rng, net.input_len());
            for domain in [Domain::Zonotope, Domain::Interval] {
                let params = SearchParams { domain, ..SearchParams::default() };
                let r = approximate_radius(&net, &x, &params).unwrap();
                if r.radius > 0.0 {
                    checked += 1;
                    let found = falsify(&net, &x, r.radius, trials, seed + (i * inputs + j) as u64).unwrap();
                    if found.is_some() {
                        violations += 1;
                    }
                }
            }
        }
    }
    (checked, violations)
}

/// Central finite differences (step `h`) of the softmax cross-entropy loss
/// against `input_gradient`. Coordinates whose one-sided differences
/// disagree straddle a ReLU or max-pool kink and are skipped, as are those
/// with `|gradient| <= 1e-6`. Returns `(worst relative error, compared, skipped)`.
pub fn gradient_check(net: &Network, x: &[f64], target: usize, h: f64) -> (f64, usize, usize) {
    use radguard::network::{input_gradient, softmax_cross_entropy};
    use radguard::Tensor;
    let loss = |v: &[f64]| softmax_cross_entropy(&net.scores(v).unwrap(), target).0;
    let g = input_gradient(net, &Tensor::new(net.input_shape().to_vec(), x.to_vec()).unwrap(), target).unwrap();
    let f0 = loss(x);
    let (mut worst, mut compared, mut skipped) = (0.0f64, 0, 0);
    for i in 0..x.len() {
        let mut p = x.to_vec();
        let mut m = x.to_vec();
        p[i] += h;
        m[i] -= h;
        let (fp, fm) = (loss(&p), loss(&m));
        let central = (fp - fm) / (2.0 * h);
        let (fwd, bwd) = ((fp - f0) / h, (f0 - fm) / h);
        let analytic = g.data()[i];
        if analytic.abs() <= 1e-6 && central.abs() <= 1e-6 {
            continue;
        }
        // Curvature of smooth pieces is O(1); a kink makes the one-sided slopes jump.
        if (fwd - bwd).abs() > 1e-2 * (fwd.abs() + bwd.abs()).max(1e-3) {
            skipped += 1;
            continue;
        }
        compared += 1;
        worst = worst.max((analytic - central).abs() / analytic.abs().max(central.abs()));
    }
    (worst, compared, skipped)
}
