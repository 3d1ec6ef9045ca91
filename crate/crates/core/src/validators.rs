//! Runtime acceptance rules over robustness radii.
//!
//! Two validators are provided:
//! - a fixed threshold on the radius, and
//! - a sliding window of recently accepted radii. A new input is accepted if
//!   its radius clears a threshold, or if adding it does not make the window's
//!   D'Agostino–Pearson normality p-value drop by more than a tolerance.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::radius::RobustnessOracle;

/// Smallest sample the omnibus normality test accepts.
pub const MIN_NORMALITY_SAMPLES: usize = 20;

pub const DEFAULT_THRESHOLD: f64 = 0.01;
pub const DEFAULT_WINDOW: usize = 50;
pub const DEFAULT_SIGMA0: f64 = 0.014;
pub const DEFAULT_SIGMA1: f64 = 0.001;

/// Omnibus statistic and its p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalityTest {
    pub skewness_z: f64,
    pub kurtosis_z: f64,
    pub statistic: f64,
    pub p_value: f64,
}

/// D'Agostino–Pearson K² test: skewness z-score (D'Agostino 1970) and
/// kurtosis z-score (Anscombe–Glynn 1983), combined as `K² = Z1² + Z2²`
/// with the χ²(2) survival `p = exp(−K²/2)`.
pub fn dagostino_pearson(samples: &[f64]) -> Result<NormalityTest> {
    let n = samples.len();
    if n < MIN_NORMALITY_SAMPLES {
        return Err(Error::InsufficientSample { given: n, needed: MIN_NORMALITY_SAMPLES });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("normality sample"));
    }
    let first = samples[0];
    if samples.iter().all(|&v| v == first) {
        return Err(Error::DegenerateSample);
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in samples {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    if m2 <= 0.0 {
        return Err(Error::DegenerateSample);
    }
    let skewness = m3 / m2.powf(1.5);
    let kurtosis = m4 / (m2 * m2);
    let skewness_z = skewness_z(skewness, nf);
    let kurtosis_z = kurtosis_z(kurtosis, nf);
    let statistic = skewness_z * skewness_z + kurtosis_z * kurtosis_z;
    Ok(NormalityTest { skewness_z, kurtosis_z, statistic, p_value: (-statistic / 2.0).exp() })
}

/// p-value of [`dagostino_pearson`].
pub fn dagostino_pearson_pvalue(samples: &[f64]) -> Result<f64> {
    dagostino_pearson(samples).map(|t| t.p_value)
}

fn skewness_z(b1: f64, n: f64) -> f64 {
    let y = b1 * ((n + 1.0) * (n + 3.0) / (6.0 * (n - 2.0))).sqrt();
    let beta2 = 3.0 * (n * n + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0)
        / ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0));
    let w2 = -1.0 + (2.0 * (beta2 - 1.0)).sqrt();
    let delta = 1.0 / (0.5 * w2.ln()).sqrt();
    let alpha = (2.0 / (w2 - 1.0)).sqrt();
    let t = y / alpha;
    delta * (t + (t * t + 1.0).sqrt()).ln()
}

fn kurtosis_z(b2: f64, n: f64) -> f64 {
    let expected = 3.0 * (n - 1.0) / (n + 1.0);
    let variance = 24.0 * n * (n - 2.0) * (n - 3.0) / ((n + 1.0) * (n + 1.0) * (n + 3.0) * (n + 5.0));
    let x = (b2 - expected) / variance.sqrt();
    let sqrt_beta1 = 6.0 * (n * n - 5.0 * n + 2.0) / ((n + 7.0) * (n + 9.0))
        * (6.0 * (n + 3.0) * (n + 5.0) / (n * (n - 2.0) * (n - 3.0))).sqrt();
    let a = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + (1.0 + 4.0 / (sqrt_beta1 * sqrt_beta1)).sqrt());
    let term1 = 1.0 - 2.0 / (9.0 * a);
    let denom = 1.0 + x * (2.0 / (a - 4.0)).sqrt();
    let term2 = denom.signum() * ((1.0 - 2.0 / a) / denom.abs()).cbrt();
    (term1 - term2) / (2.0 / (9.0 * a)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    AboveThreshold,
    BelowThreshold,
    DistributionPreserved,
    BelowThresholdAndDistributionBroken,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub verdict: Verdict,
    pub reason: Reason,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_before: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_after: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl Decision {
    pub fn is_accept(&self) -> bool {
        self.verdict == Verdict::Accept
    }

    fn simple(verdict: Verdict, reason: Reason) -> Self {
        Self { verdict, reason, p_before: None, p_after: None, diagnostic: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub theta: f64,
    pub domain: Domain,
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        Self { theta: DEFAULT_THRESHOLD, domain: Domain::Zonotope }
    }
}

impl ThresholdPolicy {
    pub fn new(theta: f64, domain: Domain) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidArgument(format!("threshold must be positive, got {theta}")));
        }
        Ok(Self { theta, domain })
    }
}

/// Accepts iff `radius ≥ θ`.
pub fn threshold_validate(radius: f64, policy: &ThresholdPolicy) -> Decision {
    if radius >= policy.theta {
        Decision::simple(Verdict::Accept, Reason::AboveThreshold)
    } else {
        Decision::simple(Verdict::Reject, Reason::BelowThreshold)
    }
}

/// Single-query form of the threshold rule: accepts iff the oracle certifies
/// radius `θ` directly, without a radius search.
pub fn threshold_certify<O: RobustnessOracle + ?Sized>(oracle: &O, x: &[f64], policy: &ThresholdPolicy) -> Result<Decision> {
    Ok(if oracle.certify(x, policy.theta)? {
        Decision::simple(Verdict::Accept, Reason::AboveThreshold)
    } else {
        Decision::simple(Verdict::Reject, Reason::BelowThreshold)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    /// Window length `s`.
    pub size: usize,
    /// Radius threshold that accepts unconditionally.
    pub sigma0: f64,
    /// Largest tolerated p-value drop.
    pub sigma1: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { size: DEFAULT_WINDOW, sigma0: DEFAULT_SIGMA0, sigma1: DEFAULT_SIGMA1 }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size < MIN_NORMALITY_SAMPLES {
            return Err(Error::InvalidArgument(format!(
                "window size must be at least {MIN_NORMALITY_SAMPLES}, got {}",
                self.size
            )));
        }
        if !(self.sigma0.is_finite() && self.sigma1.is_finite()) {
            return Err(Error::InvalidArgument("sigma0 and sigma1 must be finite".into()));
        }
        Ok(())
    }
}

/// Queue of the last `s` accepted radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowState {
    config: WindowConfig,
    queue: VecDeque<f64>,
}

/// Initial window: the last `s` of the given valid radii.
pub fn bootstrap_window(valid_radii: &[f64], config: WindowConfig) -> Result<WindowState> {
    config.validate()?;
    if valid_radii.len() < config.size {
        return Err(Error::InsufficientSample { given: valid_radii.len(), needed: config.size });
    }
    if valid_radii.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
        return Err(Error::InvalidArgument("radii must be finite and non-negative".into()));
    }
    let queue = valid_radii[valid_radii.len() - config.size..].iter().copied().collect();
    Ok(WindowState { config, queue })
}

impl WindowState {
    pub fn config(&self) -> &WindowConfig {
        &self.config
    }

    pub fn radii(&self) -> impl Iterator<Item = f64> + '_ {
        self.queue.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    /// Pure transition: returns the decision and the next state.
    pub fn step(&self, radius: f64) -> (Decision, WindowState) {
        let mut next = self.clone();
        let d = next.step_mut(radius);
        (d, next)
    }

    /// Appends `radius` as `Q[s]` and evaluates
    /// `Q[s] ≥ σ0 ∨ pvalue(Q[0..s]) − pvalue(Q[1..=s]) ≤ σ1`.
    /// Accept drops `Q[0]`; reject drops `Q[s]`, leaving the window unchanged.
    pub fn step_mut(&mut self, radius: f64) -> Decision {
        let s = self.config.size;
        if radius >= self.config.sigma0 {
            self.queue.push_back(radius);
            self.queue.pop_front();
            return Decision::simple(Verdict::Accept, Reason::AboveThreshold);
        }
        if !(radius >= 0.0 && radius.is_finite()) {
            return Decision {
                diagnostic: Some(format!("invalid radius {radius}")),
                ..Decision::simple(Verdict::Reject, Reason::BelowThresholdAndDistributionBroken)
            };
        }
        self.queue.push_back(radius);
        let all: Vec<f64> = self.queue.iter().copied().collect();
        let before = dagostino_pearson_pvalue(&all[..s]);
        let after = dagostino_pearson_pvalue(&all[1..=s]);
        match (before, after) {
            (Ok(pb), Ok(pa)) if pb - pa <= self.config.sigma1 => {
                self.queue.pop_front();
                Decision {
                    p_before: Some(pb),
                    p_after: Some(pa),
                    ..Decision::simple(Verdict::Accept, Reason::DistributionPreserved)
                }
            }
            (Ok(pb), Ok(pa)) => {
                self.queue.pop_back();
                Decision {
                    p_before: Some(pb),
                    p_after: Some(pa),
                    ..Decision::simple(Verdict::Reject, Reason::BelowThresholdAndDistributionBroken)
                }
            }
            (b, a) => {
                self.queue.pop_back();
                let err = b.as_ref().err().or(a.as_ref().err()).map(ToString::to_string);
                Decision {
                    p_before: b.ok(),
                    p_after: a.ok(),
                    diagnostic: err,
                    ..Decision::simple(Verdict::Reject, Reason::BelowThresholdAndDistributionBroken)
                }
            }
        }
    }
}
