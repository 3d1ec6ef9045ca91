//! Layered feedforward / convolutional networks: shapes, inference and
//! back-propagation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{argmax, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Relu, Activation::Sigmoid, Activation::Tanh];

    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Sigmoid => sigmoid(v),
            Activation::Tanh => v.tanh(),
        }
    }

    /// Derivative with respect to the pre-activation value. ReLU uses 0 at 0.
    pub fn derivative(self, v: f64) -> f64 {
        match self {
            Activation::Relu => {
                if v > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(v);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = v.tanh();
                1.0 - t * t
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidArgument(format!("unknown activation `{other}`"))),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Fully connected layer; `weights` is `outputs × inputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// 2-D convolution over `[channels, height, width]` inputs.
///
/// `weights` is laid out as `[out_channels, in_channels, kh, kw]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: [usize; 2],
    pub stride: usize,
    pub padding: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    fn output_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let (ph, pw) = (h + 2 * self.padding, w + 2 * self.padding);
        if ph < self.kernel[0] || pw < self.kernel[1] || self.stride == 0 {
            return None;
        }
        Some(((ph - self.kernel[0]) / self.stride + 1, (pw - self.kernel[1]) / self.stride + 1))
    }

    #[inline]
    fn weight_index(&self, oc: usize, ic: usize, ky: usize, kx: usize) -> usize {
        ((oc * self.in_channels + ic) * self.kernel[0] + ky) * self.kernel[1] + kx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(Dense),
    Conv2d(Conv2d),
    /// Non-overlapping max pooling; stride equals the window.
    MaxPool2d { window: [usize; 2] },
    Activation(Activation),
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Conv2d(_) => "conv2d",
            Layer::MaxPool2d { .. } => "maxpool2d",
            Layer::Activation(_) => "activation",
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            Layer::Dense(d) => d.weights.len() + d.bias.len(),
            Layer::Conv2d(c) => c.weights.len() + c.bias.len(),
            _ => 0,
        }
    }
}

/// Sparse view of an affine layer: `out[o] = bias[o] + Σ w · in[i]` over `rows[o]`.
#[derive(Debug, Clone)]
pub struct AffineMap {
    pub bias: Vec<f64>,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl AffineMap {
    pub fn outputs(&self) -> usize {
        self.bias.len()
    }
}

/// Network `R^m → R^|C|`. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    label_count: usize,
    /// `shapes[i]` is the input shape of layer `i`; the last entry is the output shape.
    shapes: Vec<Vec<usize>>,
}

/// Scores and predicted label of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub scores: Tensor,
    pub label: usize,
}

impl Network {
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>, label_count: usize) -> Result<Self> {
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(Error::InvalidNetwork(format!("bad input shape {input_shape:?}")));
        }
        if label_count < 2 {
            return Err(Error::InvalidNetwork("label_count must be at least 2".into()));
        }
        let mut shapes = vec![input_shape.clone()];
        for (i, layer) in layers.iter().enumerate() {
            let next = output_shape(layer, shapes.last().unwrap())
                .map_err(|m| Error::parse(Some(i), m))?;
            shapes.push(next);
        }
        let out: usize = shapes.last().unwrap().iter().product();
        if out != label_count {
            return Err(Error::InvalidNetwork(format!(
                "final layer produces {out} scores but label_count is {label_count}"
            )));
        }
        Ok(Self { input_shape, layers, label_count, shapes })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    /// Input shape of layer `i` (`i == layers().len()` gives the output shape).
    pub fn shape_at(&self, i: usize) -> &[usize] {
        &self.shapes[i]
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_len() {
            return Err(Error::ShapeMismatch { expected: self.input_shape.clone(), got: vec![x.len()] });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input"));
        }
        Ok(())
    }

    /// Class scores and the arg-max label (lowest index on ties).
    pub fn forward(&self, x: &Tensor) -> Result<Prediction> {
        if x.len() != self.input_len() {
            return Err(Error::ShapeMismatch { expected: self.input_shape.clone(), got: x.shape().to_vec() });
        }
        let scores = self.scores(x.data())?;
        let label = argmax(&scores);
        Ok(Prediction { scores: Tensor::vector(scores), label })
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut v = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            v = self.apply_layer(i, layer, &v);
        }
        Ok(v)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.scores(x)?))
    }

    /// Every intermediate value, starting with the input itself.
    pub fn forward_trace(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_input(x)?;
        let mut trace = Vec::with_capacity(self.layers.len() + 1);
        trace.push(x.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let next = self.apply_layer(i, layer, trace.last().unwrap());
            trace.push(next);
        }
        Ok(trace)
    }

    fn apply_layer(&self, i: usize, layer: &Layer, input: &[f64]) -> Vec<f64> {
        match layer {
            Layer::Dense(d) => d
                .weights
                .chunks_exact(d.inputs)
                .zip(&d.bias)
                .map(|(row, b)| b + row.iter().zip(input).map(|(w, v)| w * v).sum::<f64>())
                .collect(),
            Layer::Conv2d(c) => conv_forward(c, &self.shapes[i], &self.shapes[i + 1], input),
            Layer::MaxPool2d { window } => pool_groups(&self.shapes[i], *window)
                .iter()
                .map(|g| g.iter().map(|&j| input[j]).fold(f64::NEG_INFINITY, f64::max))
                .collect(),
            Layer::Activation(a) => input.iter().map(|&v| a.apply(v)).collect(),
        }
    }

    /// Propagates `grad_out` (gradient w.r.t. the scores) back to the input.
    /// When `params` is given, parameter gradients are accumulated into it.
    pub(crate) fn backward(
        &self,
        trace: &[Vec<f64>],
        grad_out: Vec<f64>,
        mut params: Option<&mut [LayerGrad]>,
    ) -> Vec<f64> {
        let mut grad = grad_out;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace[i];
            grad = match layer {
                Layer::Dense(d) => {
                    if let Some(p) = params.as_deref_mut() {
                        let g = &mut p[i];
                        for (o, go) in grad.iter().enumerate() {
                            g.bias[o] += go;
                            let row = &mut g.weights[o * d.inputs..(o + 1) * d.inputs];
                            for (w, v) in row.iter_mut().zip(input) {
                                *w += go * v;
                            }
                        }
                    }
                    let mut gi = vec![0.0; d.inputs];
                    for (row, go) in d.weights.chunks_exact(d.inputs).zip(&grad) {
                        for (acc, w) in gi.iter_mut().zip(row) {
                            *acc += w * go;
                        }
                    }
                    gi
                }
                Layer::Conv2d(c) => {
                    let g = params.as_deref_mut().map(|p| &mut p[i]);
                    conv_backward(c, &self.shapes[i], &self.shapes[i + 1], input, &grad, g)
                }
                Layer::MaxPool2d { window } => {
                    let mut gi = vec![0.0; input.len()];
                    for (group, go) in pool_groups(&self.shapes[i], *window).iter().zip(&grad) {
                        let mut best = group[0];
                        for &j in &group[1..] {
                            if input[j] > input[best] {
                                best = j;
                            }
                        }
                        gi[best] += go;
                    }
                    gi
                }
                Layer::Activation(a) => {
                    grad.iter().zip(input).map(|(go, &v)| go * a.derivative(v)).collect()
                }
            };
        }
        grad
    }

    /// Zeroed gradient buffers matching every layer's parameters.
    pub(crate) fn zero_grads(&self) -> Vec<LayerGrad> {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Dense(d) => LayerGrad { weights: vec![0.0; d.weights.len()], bias: vec![0.0; d.bias.len()] },
                Layer::Conv2d(c) => LayerGrad { weights: vec![0.0; c.weights.len()], bias: vec![0.0; c.bias.len()] },
                _ => LayerGrad::default(),
            })
            .collect()
    }

    /// Sparse affine form of layer `i`, or `None` for non-affine layers.
    pub fn affine_map(&self, i: usize) -> Option<AffineMap> {
        match &self.layers[i] {
            Layer::Dense(d) => Some(AffineMap {
                bias: d.bias.clone(),
                rows: d
                    .weights
                    .chunks_exact(d.inputs)
                    .map(|row| row.iter().copied().enumerate().filter(|(_, w)| *w != 0.0).collect())
                    .collect(),
            }),
            Layer::Conv2d(c) => Some(conv_affine(c, &self.shapes[i], &self.shapes[i + 1])),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

fn output_shape(layer: &Layer, input: &[usize]) -> std::result::Result<Vec<usize>, String> {
    let n: usize = input.iter().product();
    match layer {
        Layer::Dense(d) => {
            if d.inputs != n {
                return Err(format!("dense layer expects {} inputs, previous layer yields {n}", d.inputs));
            }
            if d.weights.len() != d.inputs * d.outputs || d.bias.len() != d.outputs {
                return Err(format!(
                    "dense layer {}x{} has {} weights and {} biases",
                    d.outputs,
                    d.inputs,
                    d.weights.len(),
                    d.bias.len()
                ));
            }
            Ok(vec![d.outputs])
        }
        Layer::Conv2d(c) => {
            let [ch, h, w] = three_d(input)?;
            if ch != c.in_channels {
                return Err(format!("conv2d expects {} channels, got {ch}", c.in_channels));
            }
            let expected = c.out_channels * c.in_channels * c.kernel[0] * c.kernel[1];
            if c.weights.len() != expected || c.bias.len() != c.out_channels {
                return Err(format!(
                    "conv2d expects {expected} weights and {} biases, got {} and {}",
                    c.out_channels,
                    c.weights.len(),
                    c.bias.len()
                ));
            }
            let (oh, ow) = c
                .output_hw(h, w)
                .ok_or_else(|| format!("conv2d kernel {:?} does not fit input {h}x{w}", c.kernel))?;
            Ok(vec![c.out_channels, oh, ow])
        }
        Layer::MaxPool2d { window } => {
            let [ch, h, w] = three_d(input)?;
            if window[0] == 0 || window[1] == 0 || h % window[0] != 0 || w % window[1] != 0 {
                return Err(format!("maxpool window {window:?} must divide spatial dims {h}x{w}"));
            }
            Ok(vec![ch, h / window[0], w / window[1]])
        }
        Layer::Activation(_) => Ok(input.to_vec()),
    }
}

fn three_d(shape: &[usize]) -> std::result::Result<[usize; 3], String> {
    match shape {
        [c, h, w] => Ok([*c, *h, *w]),
        other => Err(format!("expected a [channels, height, width] input, got {other:?}")),
    }
}

/// Flattened input indices feeding each pooled output of a `[c, h, w]`
/// tensor, in output order.
pub fn pool_groups(shape: &[usize], window: [usize; 2]) -> Vec<Vec<usize>> {
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let (oh, ow) = (h / window[0], w / window[1]);
    let mut groups = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut g = Vec::with_capacity(window[0] * window[1]);
                for ky in 0..window[0] {
                    for kx in 0..window[1] {
                        g.push((ch * h + oy * window[0] + ky) * w + ox * window[1] + kx);
                    }
                }
                groups.push(g);
            }
        }
    }
    groups
}

/// Calls `f(out_index, weight_index, in_index)` for every in-range tap.
fn for_each_tap(c: &Conv2d, in_shape: &[usize], out_shape: &[usize], mut f: impl FnMut(usize, usize, usize)) {
    let (h, w) = (in_shape[1] as isize, in_shape[2] as isize);
    let (oh, ow) = (out_shape[1], out_shape[2]);
    let pad = c.padding as isize;
    for oc in 0..c.out_channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let o = (oc * oh + oy) * ow + ox;
                for ic in 0..c.in_channels {
                    for ky in 0..c.kernel[0] {
                        let iy = (oy * c.stride + ky) as isize - pad;
                        if iy < 0 || iy >= h {
                            continue;
                        }
                        for kx in 0..c.kernel[1] {
                            let ix = (ox * c.stride + kx) as isize - pad;
                            if ix < 0 || ix >= w {
                                continue;
                            }
                            let i = (ic * h as usize + iy as usize) * w as usize + ix as usize;
                            f(o, c.weight_index(oc, ic, ky, kx), i);
                        }
                    }
                }
            }
        }
    }
}

fn conv_forward(c: &Conv2d, in_shape: &[usize], out_shape: &[usize], input: &[f64]) -> Vec<f64> {
    let plane = out_shape[1] * out_shape[2];
    let mut out: Vec<f64> = (0..out_shape.iter().product::<usize>()).map(|o| c.bias[o / plane]).collect();
    for_each_tap(c, in_shape, out_shape, |o, wi, i| out[o] += c.weights[wi] * input[i]);
    out
}

fn conv_backward(
    c: &Conv2d,
    in_shape: &[usize],
    out_shape: &[usize],
    input: &[f64],
    grad: &[f64],
    params: Option<&mut LayerGrad>,
) -> Vec<f64> {
    let mut gi = vec![0.0; input.len()];
    match params {
        Some(p) => {
            let plane = out_shape[1] * out_shape[2];
            for (o, go) in grad.iter().enumerate() {
                p.bias[o / plane] += go;
            }
            for_each_tap(c, in_shape, out_shape, |o, wi, i| {
                gi[i] += c.weights[wi] * grad[o];
                p.weights[wi] += input[i] * grad[o];
            });
        }
        None => for_each_tap(c, in_shape, out_shape, |o, wi, i| gi[i] += c.weights[wi] * grad[o]),
    }
    gi
}

fn conv_affine(c: &Conv2d, in_shape: &[usize], out_shape: &[usize]) -> AffineMap {
    let plane = out_shape[1] * out_shape[2];
    let n: usize = out_shape.iter().product();
    let mut rows = vec![Vec::new(); n];
    for_each_tap(c, in_shape, out_shape, |o, wi, i| {
        if c.weights[wi] != 0.0 {
            rows[o].push((i, c.weights[wi]));
        }
    });
    AffineMap { bias: (0..n).map(|o| c.bias[o / plane]).collect(), rows }
}

/// Softmax cross-entropy of `scores` against `target`, with its gradient
/// w.r.t. the scores.
pub fn softmax_cross_entropy(scores: &[f64], target: usize) -> (f64, Vec<f64>) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let loss = total.ln() + max - scores[target];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / total).collect();
    grad[target] -= 1.0;
    (loss, grad)
}

/// Gradient of the softmax cross-entropy loss for `target` w.r.t. the input.
pub fn input_gradient(net: &Network, x: &Tensor, target: usize) -> Result<Tensor> {
    if target >= net.label_count() {
        return Err(Error::InvalidArgument(format!(
            "target {target} out of range for {} labels",
            net.label_count()
        )));
    }
    if x.len() != net.input_len() {
        return Err(Error::ShapeMismatch { expected: net.input_shape().to_vec(), got: x.shape().to_vec() });
    }
    let trace = net.forward_trace(x.data())?;
    let (_, grad_scores) = softmax_cross_entropy(trace.last().unwrap(), target);
    let grad = net.backward(&trace, grad_scores, None);
    Tensor::new(x.shape().to_vec(), grad)
}
