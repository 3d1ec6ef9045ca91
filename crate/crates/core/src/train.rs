//! Minimal mini-batch SGD for fixture networks.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::arch::Architecture;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::network::{softmax_cross_entropy, Activation, Layer, Network};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub activation: Activation,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub final_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

pub fn accuracy(net: &Network, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for s in data.samples() {
        if net.predict(s.input.data())? == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Trains a freshly initialised network; deterministic for a fixed seed.
pub fn train_sgd(train: &Dataset, test: Option<&Dataset>, config: &TrainConfig) -> Result<(Network, TrainReport)> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if config.batch_size == 0 || !(config.learning_rate > 0.0) {
        return Err(Error::InvalidArgument("batch size and learning rate must be positive".into()));
    }
    let mut net = config.architecture.build(train.input_shape(), config.activation, config.seed)?;
    train.check_labels(net.label_count())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut final_loss = f64::NAN;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = net.zero_grads();
            for &i in batch {
                let s = &train.samples()[i];
                let trace = net.forward_trace(s.input.data())?;
                let (loss, g) = softmax_cross_entropy(trace.last().unwrap(), s.label);
                total += loss;
                net.backward(&trace, g, Some(&mut grads));
            }
            let step = config.learning_rate / batch.len() as f64;
            for (layer, g) in net.layers_mut().iter_mut().zip(&grads) {
                let (w, b) = match layer {
                    Layer::Dense(d) => (&mut d.weights, &mut d.bias),
                    Layer::Conv2d(c) => (&mut c.weights, &mut c.bias),
                    _ => continue,
                };
                w.iter_mut().zip(&g.weights).for_each(|(p, d)| *p -= step * d);
                b.iter_mut().zip(&g.bias).for_each(|(p, d)| *p -= step * d);
            }
        }
        final_loss = total / train.len() as f64;
        if !final_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
    }
    let report = TrainReport {
        epochs: config.epochs,
        final_loss,
        train_accuracy: accuracy(&net, train)?,
        test_accuracy: test.map(|t| accuracy(&net, t)).transpose()?,
    };
    Ok((net, report))
}
