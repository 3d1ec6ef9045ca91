//! Compact architecture strings such as `3x30,10` or `6c3p1,mp2,16c3,mp2,128,10`.
//!
//! Tokens are comma separated:
//! - `M` a dense layer of `M` units, `NxM` (or `N×M`) for `N` of them;
//! - `FcK` a convolution with `F` filters of `K×K`, optionally followed by
//!   `sS` (stride) and `pP` (zero padding), e.g. `6c3p1`;
//! - `mpK` a `K×K` max pool.
//!
//! Every dense/conv layer except the last is followed by the chosen
//! activation. The last token must be a dense layer whose width is the label
//! count.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{Activation, Conv2d, Dense, Layer, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchLayer {
    Dense(usize),
    Conv { filters: usize, kernel: usize, stride: usize, padding: usize },
    MaxPool(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    layers: Vec<ArchLayer>,
}

impl Architecture {
    pub fn layers(&self) -> &[ArchLayer] {
        &self.layers
    }

    pub fn label_count(&self) -> usize {
        match self.layers.last() {
            Some(ArchLayer::Dense(n)) => *n,
            _ => unreachable!("validated on parse"),
        }
    }

    /// Layer count in the usual "input + weighted layers" convention.
    pub fn depth(&self) -> usize {
        1 + self.layers.iter().filter(|l| !matches!(l, ArchLayer::MaxPool(_))).count()
    }

    /// Instantiates the architecture with seeded random weights.
    pub fn build(&self, input_shape: &[usize], activation: Activation, seed: u64) -> Result<Network> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        let mut shape = input_shape.to_vec();
        let weighted = self.layers.iter().filter(|l| !matches!(l, ArchLayer::MaxPool(_))).count();
        let mut seen = 0;
        for (i, spec) in self.layers.iter().enumerate() {
            match *spec {
                ArchLayer::Dense(out) => {
                    let inputs: usize = shape.iter().product();
                    let weights = init_weights(&mut rng, activation, inputs, out, inputs * out);
                    layers.push(Layer::Dense(Dense { inputs, outputs: out, weights, bias: vec![0.0; out] }));
                    shape = vec![out];
                    seen += 1;
                }
                ArchLayer::Conv { filters, kernel, stride, padding } => {
                    let [c, h, w] = match shape.as_slice() {
                        [c, h, w] => [*c, *h, *w],
                        _ => {
                            return Err(Error::InvalidArgument(format!(
                                "conv token {i} needs a [channels, height, width] input, got {shape:?}"
                            )))
                        }
                    };
                    let fan_in = c * kernel * kernel;
                    let weights = init_weights(&mut rng, activation, fan_in, filters * kernel * kernel, filters * fan_in);
                    layers.push(Layer::Conv2d(Conv2d {
                        in_channels: c,
                        out_channels: filters,
                        kernel: [kernel, kernel],
                        stride,
                        padding,
                        weights,
                        bias: vec![0.0; filters],
                    }));
                    let oh = (h + 2 * padding).checked_sub(kernel).map(|v| v / stride + 1);
                    let ow = (w + 2 * padding).checked_sub(kernel).map(|v| v / stride + 1);
                    match (oh, ow) {
                        (Some(oh), Some(ow)) => shape = vec![filters, oh, ow],
                        _ => return Err(Error::InvalidArgument(format!("conv token {i} does not fit {shape:?}"))),
                    }
                    seen += 1;
                }
                ArchLayer::MaxPool(k) => {
                    layers.push(Layer::MaxPool2d { window: [k, k] });
                    if shape.len() == 3 {
                        shape = vec![shape[0], shape[1] / k, shape[2] / k];
                    }
                }
            }
            if seen < weighted && !matches!(spec, ArchLayer::MaxPool(_)) {
                layers.push(Layer::Activation(activation));
            }
        }
        Network::new(input_shape.to_vec(), layers, self.label_count())
    }
}

fn init_weights(rng: &mut ChaCha8Rng, activation: Activation, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let limit = match activation {
        Activation::Relu => (6.0 / fan_in as f64).sqrt(),
        _ => (6.0 / (fan_in + fan_out) as f64).sqrt(),
    };
    (0..n).map(|_| rng.gen_range(-limit..limit)).collect()
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |t: &str| Error::InvalidArgument(format!("bad architecture token `{t}` in `{s}`"));
        let mut layers = Vec::new();
        for raw in s.split(',') {
            let t = raw.trim().to_ascii_lowercase().replace('×', "x");
            if t.is_empty() {
                return Err(bad(raw));
            }
            if let Some(k) = t.strip_prefix("mp") {
                layers.push(ArchLayer::MaxPool(k.parse().map_err(|_| bad(raw))?));
            } else if let Some((f, rest)) = t.split_once('c') {
                let filters = f.parse().map_err(|_| bad(raw))?;
                let (mut kernel, mut stride, mut padding) = (String::new(), 1, 0);
                let mut chars = rest.chars().peekable();
                while let Some(ch) = chars.peek().copied().filter(char::is_ascii_digit) {
                    kernel.push(ch);
                    chars.next();
                }
                while let Some(tag) = chars.next() {
                    let num: String = std::iter::from_fn(|| chars.next_if(char::is_ascii_digit)).collect();
                    let v = num.parse().map_err(|_| bad(raw))?;
                    match tag {
                        's' => stride = v,
                        'p' => padding = v,
                        _ => return Err(bad(raw)),
                    }
                }
                let kernel = kernel.parse().map_err(|_| bad(raw))?;
                if filters == 0 || kernel == 0 || stride == 0 {
                    return Err(bad(raw));
                }
                layers.push(ArchLayer::Conv { filters, kernel, stride, padding });
            } else if let Some((n, m)) = t.split_once('x') {
                let n: usize = n.parse().map_err(|_| bad(raw))?;
                let m: usize = m.parse().map_err(|_| bad(raw))?;
                if m == 0 {
                    return Err(bad(raw));
                }
                layers.extend(std::iter::repeat(ArchLayer::Dense(m)).take(n));
            } else {
                let m: usize = t.parse().map_err(|_| bad(raw))?;
                if m == 0 {
                    return Err(bad(raw));
                }
                layers.push(ArchLayer::Dense(m));
            }
        }
        match layers.last() {
            Some(ArchLayer::Dense(n)) if *n >= 2 => Ok(Self { layers }),
            _ => Err(Error::InvalidArgument(format!("architecture `{s}` must end in a dense layer of >= 2 labels"))),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .layers
            .iter()
            .map(|l| match l {
                ArchLayer::Dense(n) => n.to_string(),
                ArchLayer::Conv { filters, kernel, stride, padding } => {
                    let mut s = format!("{filters}c{kernel}");
                    if *stride != 1 {
                        s += &format!("s{stride}");
                    }
                    if *padding != 0 {
                        s += &format!("p{padding}");
                    }
                    s
                }
                ArchLayer::MaxPool(k) => format!("mp{k}"),
            })
            .collect();
        f.write_str(&parts.join(","))
    }
}
