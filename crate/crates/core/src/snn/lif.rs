//! Discrete-time current-based leaky integrate-and-fire dynamics.
//!
//! ```text
//! I(t) = α·I(t-1) + input(t)
//! U(t) = (β·U(t-1) + I(t)) · (1 - S(t-1))
//! S(t) = Θ(U(t) - threshold)
//! ```
//!
//! The resting potential is 0 and the input resistance 1, so currents are in
//! voltage units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FIRING_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifParams {
    pub tau_mem_ms: f64,
    pub tau_syn_ms: f64,
    pub time_bin_size_ms: f64,
    /// Current decay per step, `exp(-bin / tau_syn)`.
    pub alpha: f64,
    /// Voltage decay per step, `exp(-bin / tau_mem)`.
    pub beta: f64,
    pub firing_threshold: f64,
}

impl LifParams {
    pub fn new(tau_mem_ms: f64, tau_syn_ms: f64, time_bin_size_ms: f64) -> Result<Self> {
        for (name, v) in [
            ("tau_mem", tau_mem_ms),
            ("tau_syn", tau_syn_ms),
            ("time_bin_size", time_bin_size_ms),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(LifParams {
            tau_mem_ms,
            tau_syn_ms,
            time_bin_size_ms,
            alpha: (-time_bin_size_ms / tau_syn_ms).exp(),
            beta: (-time_bin_size_ms / tau_mem_ms).exp(),
            firing_threshold: DEFAULT_FIRING_THRESHOLD,
        })
    }

    /// From membrane constant and the membrane/synapse ratio.
    pub fn from_ratio(tau_mem_ms: f64, tau_ratio: f64, time_bin_size_ms: f64) -> Result<Self> {
        if !(tau_ratio.is_finite() && tau_ratio > 0.0) {
            return Err(Error::invalid("tau_ratio must be positive"));
        }
        Self::new(tau_mem_ms, tau_mem_ms / tau_ratio, time_bin_size_ms)
    }

    /// Explicit decay factors, bypassing the time-constant parameterization.
    pub fn from_decays(alpha: f64, beta: f64, firing_threshold: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
            return Err(Error::invalid("decay factors must lie in (0, 1)"));
        }
        if !(firing_threshold.is_finite() && firing_threshold > 0.0) {
            return Err(Error::invalid("firing threshold must be positive"));
        }
        Ok(LifParams {
            tau_mem_ms: -1.0 / beta.ln(),
            tau_syn_ms: -1.0 / alpha.ln(),
            time_bin_size_ms: 1.0,
            alpha,
            beta,
            firing_threshold,
        })
    }

    pub fn with_threshold(mut self, firing_threshold: f64) -> Self {
        self.firing_threshold = firing_threshold;
        self
    }

    /// Checks that the decays agree with the time constants.
    pub fn validate(&self) -> Result<()> {
        let a = (-self.time_bin_size_ms / self.tau_syn_ms).exp();
        let b = (-self.time_bin_size_ms / self.tau_mem_ms).exp();
        if (a - self.alpha).abs() > 1e-12 || (b - self.beta).abs() > 1e-12 {
            return Err(Error::invalid("alpha/beta inconsistent with time constants"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0 && self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::invalid("decay factors must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Per-neuron state of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub current: Vec<f64>,
    pub voltage: Vec<f64>,
    pub spikes: Vec<f64>,
}

impl LayerState {
    pub fn zeros(n: usize) -> Self {
        LayerState {
            current: vec![0.0; n],
            voltage: vec![0.0; n],
            spikes: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.current.len()
    }

    pub fn is_empty(&self) -> bool {
        self.current.is_empty()
    }

    /// Advance one step in place. `weighted_input` is the synaptic drive.
    pub fn step(&mut self, params: &LifParams, weighted_input: &[f64]) -> Result<()> {
        if weighted_input.len() != self.len() {
            return Err(Error::shape(self.len(), weighted_input.len()));
        }
        if weighted_input.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("LIF input"));
        }
        let (alpha, beta, theta) = (params.alpha, params.beta, params.firing_threshold);
        for i in 0..self.len() {
            let current = alpha * self.current[i] + weighted_input[i];
            let voltage = (beta * self.voltage[i] + current) * (1.0 - self.spikes[i]);
            self.current[i] = current;
            self.voltage[i] = voltage;
            self.spikes[i] = heaviside(voltage - theta);
        }
        Ok(())
    }
}

/// Functional form of [`LayerState::step`].
pub fn lif_step(state: &LayerState, params: &LifParams, weighted_input: &[f64]) -> Result<LayerState> {
    let mut next = state.clone();
    next.step(params, weighted_input)?;
    Ok(next)
}

/// Spike decision; the threshold itself fires.
#[inline]
pub fn heaviside(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_state_zero_input_stays_silent() {
        let p = LifParams::new(20.0, 2.0, 1.0).unwrap();
        let s = lif_step(&LayerState::zeros(3), &p, &[0.0; 3]).unwrap();
        assert_eq!(s, LayerState::zeros(3));
    }

    #[test]
    fn spike_then_reset() {
        let p = LifParams::from_decays(0.9, 0.8, 1.0).unwrap();
        let s1 = lif_step(&LayerState::zeros(1), &p, &[1.2]).unwrap();
        assert_eq!(s1.current[0], 1.2);
        assert_eq!(s1.voltage[0], 1.2);
        assert_eq!(s1.spikes[0], 1.0);
        let s2 = lif_step(&s1, &p, &[0.0]).unwrap();
        assert!((s2.current[0] - 1.08).abs() < 1e-15);
        assert_eq!(s2.voltage[0], 0.0);
        assert_eq!(s2.spikes[0], 0.0);
    }

    #[test]
    fn current_decays_geometrically_without_input() {
        let p = LifParams::from_decays(0.7, 0.5, 1e9).unwrap();
        let mut s = LayerState::zeros(1);
        s.current[0] = 2.0;
        for t in 1..=10 {
            s.step(&p, &[0.0]).unwrap();
            assert!((s.current[0] - 2.0 * 0.7f64.powi(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_is_inclusive() {
        let p = LifParams::from_decays(0.5, 0.5, 1.0).unwrap();
        let s = lif_step(&LayerState::zeros(1), &p, &[1.0]).unwrap();
        assert_eq!(s.spikes[0], 1.0);
    }

    #[test]
    fn decays_follow_time_constants() {
        let p = LifParams::from_ratio(50.0, 10.0, 3.0).unwrap();
        assert!((p.alpha - (-0.6f64).exp()).abs() < 1e-15);
        assert!((p.beta - (-0.06f64).exp()).abs() < 1e-15);
        p.validate().unwrap();
        assert!(LifParams::new(0.0, 1.0, 1.0).is_err());
        let mut bad = p;
        bad.alpha = 0.5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn non_finite_input_is_reported() {
        let p = LifParams::new(20.0, 2.0, 1.0).unwrap();
        assert!(lif_step(&LayerState::zeros(1), &p, &[f64::NAN]).is_err());
        assert!(lif_step(&LayerState::zeros(2), &p, &[0.0]).is_err());
    }
}
