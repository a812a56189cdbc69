//! Fixed-point inference in the style of Loihi compartments.
//!
//! Per layer, with 12-bit decay constants δ and integer weights `w`:
//!
//! ```text
//! I(t) = I(t-1)·(4096 − δᴵ)/4096 + 64·Σ w·s(t)
//! U(t) = U(t-1)·(4096 − δᵁ)/4096 + I(t)
//! spike and U ← 0 when U(t) ≥ θ_q
//! ```
//!
//! Divisions truncate toward zero. A neuron that spiked holds `U = 0` for
//! the following step, which mirrors the float model's reset.

pub mod synops;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use synops::{float_synops, SynOpReport};

use crate::container::Container;
use crate::error::{Error, Result};
use crate::event_codec::BinnedSpikeTensor;
use crate::snn::{argmax_count, LifParams, NetworkDef};

pub const DECAY_ONE: i64 = 4096;
/// Input scaling applied to every synaptic weight.
pub const WEIGHT_EXP: i64 = 64;
pub const W_MIN: i64 = -256;
pub const W_MAX: i64 = 254;
/// Idle steps simulated after every sample.
pub const BLANK_STEPS: usize = 100;

/// `int(4096·(1 − e^(−bin/τ)))`, clamped to `[0, 4096]`. An infinite τ gives 0.
pub fn decay_from_tau(tau_ms: f64, bin_ms: f64) -> Result<i64> {
    if tau_ms.is_nan() || tau_ms <= 0.0 || !(bin_ms.is_finite() && bin_ms > 0.0) {
        return Err(Error::invalid(format!("decay needs τ > 0 and bin > 0, got {tau_ms}, {bin_ms}")));
    }
    let d = (DECAY_ONE as f64 * (1.0 - (-bin_ms / tau_ms).exp())).trunc() as i64;
    Ok(d.clamp(0, DECAY_ONE))
}

/// Round to the nearest even integer, ties away from zero, then clamp to
/// the 9-bit weight range.
pub fn quantize_value(x: f64) -> i64 {
    let half = x / 2.0;
    ((half.round() * 2.0) as i64).clamp(W_MIN, W_MAX)
}

/// Largest integer scale with `max|w|·s ≤ 256` whose positive weights still
/// round inside the range (`max w·s < 255`).
pub fn weight_scale(mats: &[&Array2<f64>]) -> Result<i64> {
    let values = || mats.iter().flat_map(|m| m.iter().copied());
    let max_abs = values().fold(0.0f64, |m, w| m.max(w.abs()));
    if max_abs == 0.0 || !max_abs.is_finite() {
        return Err(Error::DegenerateScale("weights are all zero or non-finite"));
    }
    let max_pos = values().fold(0.0f64, f64::max);
    let mut s = (256.0 / max_abs).trunc() as i64;
    while s > 0 && max_pos * s as f64 >= 255.0 {
        s -= 1;
    }
    if s < 1 {
        return Err(Error::DegenerateScale("weights too large for an integer scale"));
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantParams {
    pub delta_current: i64,
    pub delta_voltage: i64,
    pub w_scale: i64,
    pub threshold: i64,
}

impl QuantParams {
    pub fn from_lif(lif: &LifParams, w_scale: i64) -> Result<Self> {
        Ok(QuantParams {
            delta_current: decay_from_tau(lif.tau_syn_ms, lif.time_bin_size_ms)?,
            delta_voltage: decay_from_tau(lif.tau_mem_ms, lif.time_bin_size_ms)?,
            w_scale,
            threshold: (WEIGHT_EXP as f64 * lif.firing_threshold * w_scale as f64).round() as i64,
        })
    }
}

/// Quantize a set of matrices sharing one scale.
pub fn quantize_weights(mats: &[&Array2<f64>], firing_threshold: f64) -> Result<(Vec<Array2<i64>>, i64, i64)> {
    let s = weight_scale(mats)?;
    let q = mats.iter().map(|m| m.mapv(|w| quantize_value(w * s as f64))).collect();
    let theta_q = (WEIGHT_EXP as f64 * firing_threshold * s as f64).round() as i64;
    Ok((q, s, theta_q))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedNetwork {
    pub w_in: Array2<i64>,
    pub v_rec: Option<Array2<i64>>,
    pub w_out: Array2<i64>,
    pub hidden: QuantParams,
    pub out: QuantParams,
}

impl QuantizedNetwork {
    /// Post-training quantization; hidden input and recurrent weights share
    /// one scale.
    pub fn from_float(net: &NetworkDef) -> Result<Self> {
        let mut hidden_mats = vec![&net.w_in];
        if let Some(v) = &net.v_rec {
            hidden_mats.push(v);
        }
        let (mut q, s_h, _) = quantize_weights(&hidden_mats, net.lif_hidden.firing_threshold)?;
        let v_rec = net.v_rec.as_ref().map(|_| q.pop().unwrap());
        let w_in = q.pop().unwrap();
        let (mut qo, s_o, _) = quantize_weights(&[&net.w_out], net.lif_out.firing_threshold)?;
        Ok(QuantizedNetwork {
            w_in,
            v_rec,
            w_out: qo.pop().unwrap(),
            hidden: QuantParams::from_lif(&net.lif_hidden, s_h)?,
            out: QuantParams::from_lif(&net.lif_out, s_o)?,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.w_in.ncols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_in.nrows()
    }

    pub fn n_outputs(&self) -> usize {
        self.w_out.nrows()
    }

    pub fn is_recurrent(&self) -> bool {
        self.v_rec.is_some()
    }

    pub fn hidden_fanout(&self) -> usize {
        self.n_outputs() + if self.is_recurrent() { self.hidden_size() } else { 0 }
    }

    /// Datasets: `kind` = "quantized_network", `recurrent`, integer `w_in`,
    /// `v_rec` (if recurrent), `w_out`, and for `hidden` / `out` the integers
    /// `<layer>.delta_current`, `<layer>.delta_voltage`, `<layer>.w_scale`,
    /// `<layer>.threshold`.
    pub fn to_container(&self) -> Container {
        let mut c = Container::new();
        c.put_text("kind", "quantized_network");
        c.put_int("recurrent", self.is_recurrent() as i64);
        let put = |c: &mut Container, name: &str, m: &Array2<i64>| {
            let (r, k) = m.dim();
            c.put_i64(name, &[r, k], m.iter().copied().collect());
        };
        put(&mut c, "w_in", &self.w_in);
        if let Some(v) = &self.v_rec {
            put(&mut c, "v_rec", v);
        }
        put(&mut c, "w_out", &self.w_out);
        for (layer, p) in [("hidden", &self.hidden), ("out", &self.out)] {
            c.put_int(&format!("{layer}.delta_current"), p.delta_current);
            c.put_int(&format!("{layer}.delta_voltage"), p.delta_voltage);
            c.put_int(&format!("{layer}.w_scale"), p.w_scale);
            c.put_int(&format!("{layer}.threshold"), p.threshold);
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.text("kind")? != "quantized_network" {
            return Err(Error::parse("container does not hold a quantized network"));
        }
        let get = |name: &str| -> Result<Array2<i64>> {
            let (dims, data) = c.i64s(name)?;
            if dims.len() != 2 {
                return Err(Error::parse(format!("`{name}` must be 2-D")));
            }
            Array2::from_shape_vec((dims[0], dims[1]), data.to_vec()).map_err(|e| Error::parse(e.to_string()))
        };
        let params = |layer: &str| -> Result<QuantParams> {
            Ok(QuantParams {
                delta_current: c.int(&format!("{layer}.delta_current"))?,
                delta_voltage: c.int(&format!("{layer}.delta_voltage"))?,
                w_scale: c.int(&format!("{layer}.w_scale"))?,
                threshold: c.int(&format!("{layer}.threshold"))?,
            })
        };
        let q = QuantizedNetwork {
            w_in: get("w_in")?,
            v_rec: if c.int("recurrent")? != 0 { Some(get("v_rec")?) } else { None },
            w_out: get("w_out")?,
            hidden: params("hidden")?,
            out: params("out")?,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden_size();
        if self.w_out.ncols() != h || self.v_rec.as_ref().is_some_and(|v| v.dim() != (h, h)) {
            return Err(Error::invalid("quantized weight shapes are inconsistent"));
        }
        let all = self.w_in.iter().chain(self.w_out.iter()).chain(self.v_rec.iter().flatten());
        for &w in all {
            if !(W_MIN..=W_MAX).contains(&w) || w % 2 != 0 {
                return Err(Error::invalid(format!("weight {w} is not an even value in [-256, 254]")));
            }
        }
        for p in [&self.hidden, &self.out] {
            if !(0..=DECAY_ONE).contains(&p.delta_current) || !(0..=DECAY_ONE).contains(&p.delta_voltage) {
                return Err(Error::invalid("decay constants must lie in [0, 4096]"));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_container().to_bytes())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_container(&Container::from_bytes(&std::fs::read(path)?)?)
    }
}

/// Integer compartment state of one layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoihiState {
    pub current: Vec<i64>,
    pub voltage: Vec<i64>,
    pub spikes: Vec<bool>,
}

impl LoihiState {
    pub fn zeros(n: usize) -> Self {
        LoihiState {
            current: vec![0; n],
            voltage: vec![0; n],
            spikes: vec![false; n],
        }
    }
}

#[inline]
fn decay(x: i64, delta: i64) -> i64 {
    x * (DECAY_ONE - delta) / DECAY_ONE
}

fn check_range(value: i64, layer: &'static str, step: usize) -> Result<i64> {
    if value > i32::MAX as i64 || value < i32::MIN as i64 {
        return Err(Error::Saturation { layer, step, value });
    }
    Ok(value)
}

/// Advance a layer given its summed integer weights `drive` (before the 64×
/// input scaling).
fn update(state: &mut LoihiState, p: &QuantParams, drive: &[i64], layer: &'static str, step: usize) -> Result<()> {
    for i in 0..drive.len() {
        let current = check_range(decay(state.current[i], p.delta_current) + WEIGHT_EXP * drive[i], layer, step)?;
        let voltage = if state.spikes[i] {
            0
        } else {
            check_range(decay(state.voltage[i], p.delta_voltage) + current, layer, step)?
        };
        state.current[i] = current;
        let fired = voltage >= p.threshold;
        state.voltage[i] = if fired { 0 } else { voltage };
        state.spikes[i] = fired;
    }
    Ok(())
}

/// One step of a layer: `weights` is `[post × pre]` and `spiking` lists the
/// presynaptic neurons active this step.
pub fn loihi_step(state: &mut LoihiState, p: &QuantParams, weights: &Array2<i64>, spiking: &[usize]) -> Result<()> {
    if weights.nrows() != state.current.len() {
        return Err(Error::shape(state.current.len(), weights.nrows()));
    }
    let mut drive = vec![0i64; weights.nrows()];
    for &j in spiking {
        if j >= weights.ncols() {
            return Err(Error::invalid(format!("presynaptic index {j} out of range")));
        }
        for (d, &w) in drive.iter_mut().zip(weights.column(j)) {
            *d += w;
        }
    }
    update(state, p, &drive, "layer", 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedOutcome {
    pub predictions: Vec<usize>,
    /// Output spikes within each sample's input window.
    pub output_counts: Vec<Vec<u64>>,
    pub report: SynOpReport,
}

impl QuantizedOutcome {
    pub fn accuracy(&self, labels: &[usize]) -> f64 {
        if labels.is_empty() {
            return 0.0;
        }
        let hits = self.predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
        hits as f64 / labels.len() as f64
    }
}

struct Transposed {
    w_in: Array2<i64>,
    v_rec: Option<Array2<i64>>,
    w_out: Array2<i64>,
}

fn add_row(acc: &mut [i64], row: ndarray::ArrayView1<'_, i64>) {
    for (a, &w) in acc.iter_mut().zip(row) {
        *a += w;
    }
}

/// Simulate one sample from zero state plus `blank_steps` idle steps.
fn run_sample(
    q: &QuantizedNetwork,
    tw: &Transposed,
    x: &BinnedSpikeTensor,
    blank_steps: usize,
) -> Result<(Vec<u64>, SynOpReport)> {
    let (h, o) = (q.hidden_size(), q.n_outputs());
    let mut hs = LoihiState::zeros(h);
    let mut os = LoihiState::zeros(o);
    let mut drive_h = vec![0i64; h];
    let mut drive_o = vec![0i64; o];
    let mut counts = vec![0u64; o];
    let mut report = SynOpReport {
        n_samples: 1,
        ..Default::default()
    };
    let active = x.active();
    let empty = Vec::new();
    for t in 0..x.n_steps() + blank_steps {
        let act = active.get(t).unwrap_or(&empty);
        drive_h.iter_mut().for_each(|d| *d = 0);
        for &j in act {
            add_row(&mut drive_h, tw.w_in.row(j as usize));
        }
        if let Some(vt) = &tw.v_rec {
            for (j, &s) in hs.spikes.iter().enumerate() {
                if s {
                    add_row(&mut drive_h, vt.row(j));
                }
            }
        }
        update(&mut hs, &q.hidden, &drive_h, "hidden", t)?;

        drive_o.iter_mut().for_each(|d| *d = 0);
        let mut n_hidden = 0;
        for (j, &s) in hs.spikes.iter().enumerate() {
            if s {
                add_row(&mut drive_o, tw.w_out.row(j));
                n_hidden += 1;
            }
        }
        update(&mut os, &q.out, &drive_o, "out", t)?;

        let n_out = os.spikes.iter().filter(|&&s| s).count() as u64;
        if t < x.n_steps() {
            for (c, &s) in counts.iter_mut().zip(&os.spikes) {
                *c += s as u64;
            }
        }
        report.input_events += act.len() as u64;
        report.hidden_spikes += n_hidden;
        report.output_spikes += n_out;
        report.synops += act.len() as u64 * h as u64 + n_hidden * q.hidden_fanout() as u64;
    }
    Ok((counts, report))
}

/// Integer inference over a sample set with [`BLANK_STEPS`] idle steps
/// after each sample.
pub fn quantized_forward(q: &QuantizedNetwork, inputs: &[BinnedSpikeTensor]) -> Result<QuantizedOutcome> {
    quantized_forward_with(q, inputs, BLANK_STEPS)
}

pub fn quantized_forward_with(
    q: &QuantizedNetwork,
    inputs: &[BinnedSpikeTensor],
    blank_steps: usize,
) -> Result<QuantizedOutcome> {
    use rayon::prelude::*;
    let t = |m: &Array2<i64>| m.t().as_standard_layout().into_owned();
    let tw = Transposed {
        w_in: t(&q.w_in),
        v_rec: q.v_rec.as_ref().map(t),
        w_out: t(&q.w_out),
    };
    for x in inputs {
        if x.n_channels() != q.n_inputs() {
            return Err(Error::shape(format!("{} input channels", q.n_inputs()), x.n_channels()));
        }
    }
    let per_sample: Vec<(Vec<u64>, SynOpReport)> = inputs
        .par_iter()
        .map(|x| run_sample(q, &tw, x, blank_steps))
        .collect::<Result<_>>()?;
    let mut report = SynOpReport::default();
    let mut predictions = Vec::with_capacity(inputs.len());
    let mut output_counts = Vec::with_capacity(inputs.len());
    for (counts, r) in per_sample {
        report.merge(&r);
        let as_f: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        predictions.push(argmax_count(&as_f));
        output_counts.push(counts);
    }
    Ok(QuantizedOutcome {
        predictions,
        output_counts,
        report,
    })
}
