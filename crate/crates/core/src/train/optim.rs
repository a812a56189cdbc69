//! Adamax: Adam with an infinity-norm second moment.
//!
//! ```text
//! m ← β₁·m + (1 − β₁)·g
//! u ← max(β₂·u, |g| + ε)
//! w ← w − η / (1 − β₁ᵗ) · m / u
//! ```

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::backward::GradientSet;
use crate::snn::NetworkDef;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamaxParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamaxParams {
    fn default() -> Self {
        AdamaxParams {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First moment and infinity-norm accumulator for one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub m: Vec<f64>,
    pub u: Vec<f64>,
}

impl Moments {
    pub fn zeros(n: usize) -> Self {
        Moments {
            m: vec![0.0; n],
            u: vec![0.0; n],
        }
    }
}

/// One Adamax update of a flat parameter slice. `t` is the 1-based step count.
pub fn optimizer_step(weights: &mut [f64], grads: &[f64], state: &mut Moments, lr: f64, t: u64, p: &AdamaxParams) {
    assert_eq!(weights.len(), grads.len());
    assert_eq!(weights.len(), state.m.len());
    let step = lr / (1.0 - p.beta1.powf(t as f64));
    for i in 0..weights.len() {
        let g = grads[i];
        state.m[i] = p.beta1 * state.m[i] + (1.0 - p.beta1) * g;
        state.u[i] = (p.beta2 * state.u[i]).max(g.abs() + p.eps);
        weights[i] -= step * state.m[i] / state.u[i];
    }
}

/// Optimizer state for all weight matrices of a network.
#[derive(Debug, Clone)]
pub struct Adamax {
    pub params: AdamaxParams,
    pub lr: f64,
    t: u64,
    w_in: Moments,
    v_rec: Option<Moments>,
    w_out: Moments,
}

impl Adamax {
    pub fn new(net: &NetworkDef, lr: f64) -> Self {
        Adamax {
            params: AdamaxParams::default(),
            lr,
            t: 0,
            w_in: Moments::zeros(net.w_in.len()),
            v_rec: net.v_rec.as_ref().map(|v| Moments::zeros(v.len())),
            w_out: Moments::zeros(net.w_out.len()),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, net: &mut NetworkDef, grads: &GradientSet) {
        self.t += 1;
        let (lr, t, p) = (self.lr, self.t, self.params);
        let apply = |w: &mut Array2<f64>, g: &Array2<f64>, s: &mut Moments| {
            optimizer_step(
                w.as_slice_mut().expect("standard layout"),
                g.as_slice().expect("standard layout"),
                s,
                lr,
                t,
                &p,
            );
        };
        apply(&mut net.w_in, &grads.d_w_in, &mut self.w_in);
        apply(&mut net.w_out, &grads.d_w_out, &mut self.w_out);
        if let (Some(w), Some(g), Some(s)) = (net.v_rec.as_mut(), grads.d_v_rec.as_ref(), self.v_rec.as_mut()) {
            apply(w, g, s);
        }
    }
}
