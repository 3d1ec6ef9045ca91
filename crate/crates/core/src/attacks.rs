//! Gradient-sign attacks and random falsification inside L∞ boxes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{input_gradient, Network};
use crate::tensor::{linf_distance, Tensor};

/// Default ε values for the single-step attack.
pub const FGSM_EPSILONS: [f64; 2] = [0.1, 0.05];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackResult {
    pub original: Tensor,
    pub adversarial: Tensor,
    pub original_label: usize,
    pub adversarial_label: usize,
    pub success: bool,
    pub perturbation_linf: f64,
    /// Budget the attack was run with (the smallest successful one for `min_pgd`).
    pub epsilon: f64,
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn result(net: &Network, x: &Tensor, label: usize, adv: Vec<f64>, epsilon: f64) -> Result<AttackResult> {
    let adversarial = Tensor::new(x.shape().to_vec(), adv)?;
    let adversarial_label = net.predict(adversarial.data())?;
    Ok(AttackResult {
        perturbation_linf: linf_distance(x.data(), adversarial.data()),
        original: x.clone(),
        original_label: label,
        adversarial_label,
        success: adversarial_label != label,
        adversarial,
        epsilon,
    })
}

fn check_epsilon(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("epsilon must be positive, got {eps}")))
    }
}

/// One step of `ε·sign(∇loss)` from `from`, projected onto the ε-box around
/// `origin` and onto `[0,1]`.
fn signed_step(net: &Network, origin: &[f64], from: &Tensor, label: usize, step: f64, eps: f64) -> Result<Vec<f64>> {
    let g = input_gradient(net, from, label)?;
    Ok(from
        .data()
        .iter()
        .zip(g.data())
        .zip(origin)
        .map(|((v, gi), o)| (v + step * sign(*gi)).clamp(o - eps, o + eps).clamp(0.0, 1.0))
        .collect())
}

/// Fast gradient sign method against the ground-truth `label`.
pub fn fgsm(net: &Network, x: &Tensor, label: usize, eps: f64) -> Result<AttackResult> {
    check_epsilon(eps)?;
    let adv = signed_step(net, x.data(), x, label, eps, eps)?;
    result(net, x, label, adv, eps)
}

/// Projected gradient descent: an FGSM step followed by `steps − 1` further
/// signed steps of `step_size`. Stops at the first misclassified iterate, so
/// it succeeds whenever FGSM does.
pub fn pgd(net: &Network, x: &Tensor, label: usize, eps: f64, steps: usize, step_size: f64) -> Result<AttackResult> {
    pgd_from(net, x, label, eps, steps, step_size, None)
}

fn pgd_from(
    net: &Network,
    x: &Tensor,
    label: usize,
    eps: f64,
    steps: usize,
    step_size: f64,
    start: Option<Vec<f64>>,
) -> Result<AttackResult> {
    check_epsilon(eps)?;
    if steps == 0 {
        return Err(Error::InvalidArgument("pgd needs at least one step".into()));
    }
    let first_step = if start.is_some() { step_size } else { eps };
    let mut current = Tensor::new(x.shape().to_vec(), start.unwrap_or_else(|| x.data().to_vec()))?;
    let mut adv = signed_step(net, x.data(), &current, label, first_step, eps)?;
    for _ in 1..steps {
        if net.predict(&adv)? != label {
            break;
        }
        current = Tensor::new(x.shape().to_vec(), adv)?;
        adv = signed_step(net, x.data(), &current, label, step_size, eps)?;
    }
    result(net, x, label, adv, eps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgdConfig {
    /// Ascending budgets to try.
    pub eps_grid: Vec<f64>,
    pub steps: usize,
    /// Step size as a fraction of the current budget.
    pub step_fraction: f64,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self { eps_grid: default_eps_grid(), steps: 20, step_fraction: 0.25 }
    }
}

/// 25 evenly spaced budgets from 0.002 to 0.1.
pub fn default_eps_grid() -> Vec<f64> {
    (0..25).map(|i| 0.002 + 0.098 * i as f64 / 24.0).collect()
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("epsilon grid must be non-empty and strictly ascending".into()));
    }
    Ok(())
}

/// Smallest-budget PGD: tries the grid in ascending order and returns the
/// first success, or the last (failed) attempt.
pub fn min_pgd(net: &Network, x: &Tensor, label: usize, config: &PgdConfig) -> Result<AttackResult> {
    check_grid(&config.eps_grid)?;
    let mut last = None;
    for &eps in &config.eps_grid {
        let r = pgd(net, x, label, eps, config.steps, eps * config.step_fraction)?;
        if r.success {
            return Ok(r);
        }
        last = Some(r);
    }
    Ok(last.expect("grid is non-empty"))
}

/// Like [`min_pgd`], but each budget starts from a seeded uniform point in
/// its ε-box instead of from `x`.
pub fn min_pgd_random_start(net: &Network, x: &Tensor, label: usize, config: &PgdConfig, seed: u64) -> Result<AttackResult> {
    check_grid(&config.eps_grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = None;
    for &eps in &config.eps_grid {
        let start = x.data().iter().map(|&v| rng.gen_range((v - eps).max(0.0)..=(v + eps).min(1.0))).collect();
        let r = pgd_from(net, x, label, eps, config.steps, eps * config.step_fraction, Some(start))?;
        if r.success {
            return Ok(r);
        }
        last = Some(r);
    }
    Ok(last.expect("grid is non-empty"))
}

/// Uniform random search in the clipped δ-box for a point whose predicted
/// label differs from that of `x`. Deterministic per seed.
pub fn falsify(net: &Network, x: &[f64], delta: f64, trials: usize, seed: u64) -> Result<Option<Vec<f64>>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("falsification needs at least one trial".into()));
    }
    let label = net.predict(x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo: Vec<f64> = x.iter().map(|v| (v - delta).max(0.0)).collect();
    let hi: Vec<f64> = x.iter().map(|v| (v + delta).min(1.0)).collect();
    let mut y = vec![0.0; x.len()];
    for trial in 0..trials {
        for ((yi, l), h) in y.iter_mut().zip(&lo).zip(&hi) {
            *yi = if l < h { rng.gen_range(*l..=*h) } else { *l };
        }
        // Corners are where linear pieces reach their extremes; try some.
        if trial % 4 == 3 {
            for ((yi, l), h) in y.iter_mut().zip(&lo).zip(&hi) {
                *yi = if rng.gen_bool(0.5) { *l } else { *h };
            }
        }
        if net.predict(&y)? != label {
            return Ok(Some(y));
        }
    }
    Ok(None)
}
