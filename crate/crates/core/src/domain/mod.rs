//! Sound, incomplete local robustness checking in the interval and zonotope
//! domains.
//!
//! The L∞ region around an input (clipped to `[0,1]^m`) is pushed through the
//! network layer by layer. The network is certified robust at `x` for radius
//! `δ` when, for every competitor class `k`, the lower bound of
//! `score_label − score_k` over the propagated region is strictly positive.

mod interval;
mod zonotope;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use interval::Interval;
pub use zonotope::Zonotope;

use crate::error::{Error, Result};
use crate::network::{pool_groups, Layer, Network};
use crate::tensor::argmax;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Interval,
    #[default]
    Zonotope,
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interval" | "box" => Ok(Domain::Interval),
            "zonotope" | "deepzono" => Ok(Domain::Zonotope),
            other => Err(Error::InvalidArgument(format!("unknown domain `{other}`"))),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Interval => "interval",
            Domain::Zonotope => "zonotope",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Robust,
    Unknown,
}

/// Result of one robustness query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub outcome: Outcome,
    /// Label of the unperturbed input.
    pub label: usize,
    /// `(k, lower bound of score_label − score_k)` for every `k ≠ label`.
    pub margins: Vec<(usize, f64)>,
}

impl Verdict {
    pub fn is_robust(&self) -> bool {
        self.outcome == Outcome::Robust
    }

    fn from_margins(label: usize, margins: Vec<(usize, f64)>) -> Self {
        let outcome = if margins.iter().all(|&(_, m)| m > 0.0) { Outcome::Robust } else { Outcome::Unknown };
        Self { outcome, label, margins }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta >= 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("radius must be finite and >= 0, got {delta}")))
    }
}

/// Output zonotope of the clipped L∞ ball of radius `delta` around `x`.
pub fn propagate_zonotope(net: &Network, x: &[f64], delta: f64) -> Result<Zonotope> {
    net.check_input(x)?;
    check_delta(delta)?;
    let mut z = Zonotope::input_region(x, delta).compact();
    for (i, layer) in net.layers().iter().enumerate() {
        z = match layer {
            Layer::Dense(_) | Layer::Conv2d(_) => z.affine(&net.affine_map(i).expect("affine layer")),
            Layer::Activation(a) => z.activation(*a).compact(),
            Layer::MaxPool2d { window } => z.maxpool(&pool_groups(net.shape_at(i), *window)).compact(),
        };
    }
    Ok(z)
}

/// Output box of the clipped L∞ ball, by direct interval arithmetic.
pub fn propagate_interval(net: &Network, x: &[f64], delta: f64) -> Result<Interval> {
    net.check_input(x)?;
    check_delta(delta)?;
    let mut b = Interval::input_region(x, delta);
    for (i, layer) in net.layers().iter().enumerate() {
        b = match layer {
            Layer::Dense(_) | Layer::Conv2d(_) => b.affine(&net.affine_map(i).expect("affine layer")),
            Layer::Activation(a) => b.activation(*a),
            Layer::MaxPool2d { window } => b.maxpool(&pool_groups(net.shape_at(i), *window)),
        };
    }
    Ok(b)
}

/// Interval domain as a degenerate zonotope: affine layers run on the
/// zonotope, and the result is re-boxed (one private symbol per dimension)
/// after every layer so no correlation survives.
pub fn propagate_boxed_zonotope(net: &Network, x: &[f64], delta: f64) -> Result<Interval> {
    net.check_input(x)?;
    check_delta(delta)?;
    let mut z = Zonotope::input_region(x, delta);
    for (i, layer) in net.layers().iter().enumerate() {
        let boxed = match layer {
            Layer::Dense(_) | Layer::Conv2d(_) => z.affine(&net.affine_map(i).expect("affine layer")).bounds(),
            Layer::Activation(a) => z.bounds().activation(*a),
            Layer::MaxPool2d { window } => z.bounds().maxpool(&pool_groups(net.shape_at(i), *window)),
        };
        z = Zonotope::from_interval(&boxed);
    }
    Ok(z.bounds())
}

/// Decides whether every point of the clipped L∞ ball of radius `delta`
/// around `x` keeps the label of `x`. `Robust` is sound; `Unknown` is not a
/// counterexample.
pub fn is_robust(net: &Network, x: &[f64], delta: f64, domain: Domain) -> Result<Verdict> {
    net.check_input(x)?;
    check_delta(delta)?;
    let scores = net.scores(x)?;
    let label = argmax(&scores);
    let others = (0..net.label_count()).filter(|&k| k != label);
    if delta == 0.0 {
        // Singleton region: the label is fixed by definition.
        let margins = others.map(|k| (k, scores[label] - scores[k])).collect();
        return Ok(Verdict { outcome: Outcome::Robust, label, margins });
    }
    let margins = match domain {
        Domain::Zonotope => {
            let z = propagate_zonotope(net, x, delta)?;
            others.map(|k| (k, z.dominance_lower_bound(label, k))).collect()
        }
        Domain::Interval => {
            let b = propagate_interval(net, x, delta)?;
            others.map(|k| (k, b.dominance_lower_bound(label, k))).collect()
        }
    };
    Ok(Verdict::from_margins(label, margins))
}
