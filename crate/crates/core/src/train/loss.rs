//! Spike-count cross-entropy and the two hidden-layer activity regularizers.
//!
//! All functions take per-sample spike counts summed over time; the lower
//! regularizer additionally needs the number of time steps to turn counts
//! into rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Derivative of the fast sigmoid `u / (1 + λ|u|)`.
#[inline]
pub fn surrogate_grad(u: f64, scale: f64) -> f64 {
    let d = 1.0 + scale * u.abs();
    1.0 / (d * d)
}

/// Strengths and thresholds of the activity regularizers and their weights
/// in the total loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegParams {
    /// Per-neuron rate threshold θ_l.
    pub lower_threshold: f64,
    pub lower_strength: f64,
    /// Population mean count threshold θ_u.
    pub upper_threshold: f64,
    pub upper_strength: f64,
    /// Weight μ₁ of the per-neuron term (`reg_neurons`).
    pub reg_neurons: f64,
    /// Weight μ₂ of the population term (`reg_spikes`).
    pub reg_spikes: f64,
}

impl Default for RegParams {
    fn default() -> Self {
        RegParams {
            lower_threshold: 1e-3,
            lower_strength: 1.0,
            upper_threshold: 100.0,
            upper_strength: 1.0,
            reg_neurons: 0.0,
            reg_spikes: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub cross_entropy: f64,
    pub reg_l1: f64,
    pub reg_l2: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(cross_entropy: f64, reg_l1: f64, reg_l2: f64, reg: &RegParams) -> Self {
        LossBreakdown {
            cross_entropy,
            reg_l1,
            reg_l2,
            total: cross_entropy + reg.reg_neurons * reg_l1 + reg.reg_spikes * reg_l2,
        }
    }
}

fn log_softmax_at(counts: &[f64], label: usize) -> f64 {
    let max = counts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + counts.iter().map(|c| (c - max).exp()).sum::<f64>().ln();
    counts[label] - lse
}

fn check_label(label: usize, n_classes: usize) -> Result<()> {
    if label >= n_classes {
        return Err(Error::LabelOutOfRange { label, n_classes });
    }
    Ok(())
}

/// Batch mean of `-log softmax(counts)[label]`.
pub fn loss_cross_entropy(counts: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if counts.len() != labels.len() {
        return Err(Error::shape(counts.len(), labels.len()));
    }
    if counts.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (c, &y) in counts.iter().zip(labels) {
        check_label(y, c.len())?;
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("spike counts"));
        }
        sum -= log_softmax_at(c, y);
    }
    Ok(sum / counts.len() as f64)
}

/// `∂L/∂counts` of one sample's contribution to the batch-mean cross-entropy.
pub fn cross_entropy_grad(counts: &[f64], label: usize, n_batch: usize) -> Vec<f64> {
    let max = counts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = counts.iter().map(|c| (c - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    exp.iter()
        .enumerate()
        .map(|(i, e)| (e / z - if i == label { 1.0 } else { 0.0 }) / n_batch as f64)
        .collect()
}

/// Per-neuron rate hinge:
/// `s_l / (N_batch + N) · Σ_samples Σ_neurons max(0, count/T - θ_l)`.
pub fn loss_reg_lower(hidden_counts: &[Vec<f64>], n_steps: usize, strength: f64, threshold: f64) -> f64 {
    let n_batch = hidden_counts.len();
    let n = hidden_counts.first().map_or(0, Vec::len);
    if n_batch + n == 0 || n_steps == 0 {
        return 0.0;
    }
    let t = n_steps as f64;
    let sum: f64 = hidden_counts
        .iter()
        .flat_map(|c| c.iter())
        .map(|&c| (c / t - threshold).max(0.0))
        .sum();
    strength / (n_batch + n) as f64 * sum
}

/// Population mean-count squared hinge:
/// `s_u / N_batch · Σ_samples max(0, Σ_i count_i / N - θ_u)²`.
pub fn loss_reg_upper(hidden_counts: &[Vec<f64>], strength: f64, threshold: f64) -> f64 {
    let n_batch = hidden_counts.len();
    if n_batch == 0 {
        return 0.0;
    }
    let sum: f64 = hidden_counts
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / c.len().max(1) as f64;
            (mean - threshold).max(0.0).powi(2)
        })
        .sum();
    strength / n_batch as f64 * sum
}

/// `∂(μ₁L₁ + μ₂L₂)/∂S_i(t)` for one sample; constant over time steps.
pub fn reg_grad_hidden(counts: &[f64], n_steps: usize, n_batch: usize, reg: &RegParams) -> Vec<f64> {
    let n = counts.len();
    let t = n_steps as f64;
    let mean = counts.iter().sum::<f64>() / n.max(1) as f64;
    let upper = reg.reg_spikes * reg.upper_strength / n_batch as f64
        * 2.0
        * (mean - reg.upper_threshold).max(0.0)
        / n.max(1) as f64;
    let lower_scale = reg.reg_neurons * reg.lower_strength / (n_batch + n) as f64 / t;
    counts
        .iter()
        .map(|&c| {
            let lower = if c / t > reg.lower_threshold { lower_scale } else { 0.0 };
            lower + upper
        })
        .collect()
}

/// All three loss terms over a batch.
pub fn loss_breakdown(
    output_counts: &[Vec<f64>],
    hidden_counts: &[Vec<f64>],
    labels: &[usize],
    n_steps: usize,
    reg: &RegParams,
) -> Result<LossBreakdown> {
    let ce = loss_cross_entropy(output_counts, labels)?;
    let l1 = loss_reg_lower(hidden_counts, n_steps, reg.lower_strength, reg.lower_threshold);
    let l2 = loss_reg_upper(hidden_counts, reg.upper_strength, reg.upper_threshold);
    Ok(LossBreakdown::new(ce, l1, l2, reg))
}
