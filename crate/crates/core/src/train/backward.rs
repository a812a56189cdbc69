//! Reverse-mode gradients through the time-unrolled two-layer network.
//!
//! Every spike derivative is replaced by [`surrogate_grad`] of the threshold
//! distance; the reset factor `1 - S(t-1)` is treated as a constant.

use ndarray::linalg::general_mat_mul;
use ndarray::Array2;

use super::loss::{cross_entropy_grad, loss_breakdown, reg_grad_hidden, surrogate_grad, LossBreakdown, RegParams};
use crate::error::{Error, Result};
use crate::event_codec::BinnedSpikeTensor;
use crate::snn::{ForwardTrace, NetworkDef};

#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub d_w_in: Array2<f64>,
    pub d_v_rec: Option<Array2<f64>>,
    pub d_w_out: Array2<f64>,
}

impl GradientSet {
    pub fn zeros_like(net: &NetworkDef) -> Self {
        GradientSet {
            d_w_in: Array2::zeros(net.w_in.dim()),
            d_v_rec: net.v_rec.as_ref().map(|v| Array2::zeros(v.dim())),
            d_w_out: Array2::zeros(net.w_out.dim()),
        }
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        self.d_w_in += &other.d_w_in;
        self.d_w_out += &other.d_w_out;
        if let (Some(a), Some(b)) = (self.d_v_rec.as_mut(), other.d_v_rec.as_ref()) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_w_in
            .iter()
            .chain(self.d_w_out.iter())
            .chain(self.d_v_rec.iter().flat_map(|v| v.iter()))
            .all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.d_w_in
            .iter()
            .chain(self.d_w_out.iter())
            .chain(self.d_v_rec.iter().flat_map(|v| v.iter()))
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Gradient accumulators stored transposed, so presynaptic activity writes
/// contiguous rows; converted back once per sample set.
pub(crate) struct TransposedGrads {
    w_in: Array2<f64>,
    v_rec: Option<Array2<f64>>,
    w_out: Array2<f64>,
}

impl TransposedGrads {
    pub(crate) fn new(net: &NetworkDef) -> Self {
        TransposedGrads {
            w_in: Array2::zeros((net.n_inputs(), net.hidden_size())),
            v_rec: net.v_rec.as_ref().map(|_| Array2::zeros((net.hidden_size(), net.hidden_size()))),
            w_out: Array2::zeros((net.hidden_size(), net.n_outputs())),
        }
    }

    pub(crate) fn add_assign(&mut self, other: &TransposedGrads) {
        self.w_in += &other.w_in;
        self.w_out += &other.w_out;
        if let (Some(a), Some(b)) = (self.v_rec.as_mut(), other.v_rec.as_ref()) {
            *a += b;
        }
    }

    pub(crate) fn into_gradients(self) -> GradientSet {
        let t = |m: Array2<f64>| m.t().as_standard_layout().into_owned();
        GradientSet {
            d_w_in: t(self.w_in),
            d_v_rec: self.v_rec.map(t),
            d_w_out: t(self.w_out),
        }
    }
}

#[inline]
fn axpy(acc: &mut [f64], a: f64, x: &[f64]) {
    for (y, &v) in acc.iter_mut().zip(x) {
        *y += a * v;
    }
}

/// One sample's forward record and the upstream derivatives of the loss with
/// respect to its output spike counts and hidden spikes.
pub(crate) struct SampleGrad<'a> {
    pub input: &'a BinnedSpikeTensor,
    pub trace: &'a ForwardTrace,
    pub g_counts: Vec<f64>,
    pub g_hidden: Vec<f64>,
}

/// Accumulate the gradients of several samples of equal length, stepping
/// them backward in time together so the dense terms become matrix products.
pub(crate) fn backward_chunk(net: &NetworkDef, items: &[SampleGrad<'_>], scale: f64, acc: &mut TransposedGrads) -> Result<()> {
    let Some(first) = items.first() else {
        return Ok(());
    };
    let n_steps = first.trace.n_steps();
    for it in items {
        if it.trace.n_steps() != n_steps || it.input.n_steps() != n_steps || it.input.n_channels() != net.n_inputs() {
            return Err(Error::shape(
                format!("{}x{} input matching the trace", n_steps, net.n_inputs()),
                format!("{}x{}", it.input.n_steps(), it.input.n_channels()),
            ));
        }
    }
    let (b, h, o) = (items.len(), net.hidden_size(), net.n_outputs());
    let (ph, po) = (&net.lif_hidden, &net.lif_out);
    let active: Vec<Vec<Vec<u32>>> = items.iter().map(|it| it.input.active()).collect();

    let mut gi_o = Array2::<f64>::zeros((b, o));
    let mut gu_o = Array2::<f64>::zeros((b, o));
    let mut gi_h = Array2::<f64>::zeros((b, h));
    let mut gu_h = Array2::<f64>::zeros((b, h));
    let mut gs_h = Array2::<f64>::zeros((b, h));

    for t in (0..n_steps).rev() {
        // readout layer
        for (n, it) in items.iter().enumerate() {
            let tr = &it.trace.output;
            let (mut gi, mut gu) = (gi_o.row_mut(n), gu_o.row_mut(n));
            for k in 0..o {
                let reset_prev = if t > 0 { tr.fired[[t - 1, k]] } else { 0.0 };
                let g = it.g_counts[k] * surrogate_grad(tr.voltage[[t, k]] - po.firing_threshold, scale)
                    + po.beta * (1.0 - tr.fired[[t, k]]) * gu[k];
                gu[k] = g;
                gi[k] = g * (1.0 - reset_prev) + po.alpha * gi[k];
            }
            for (j, &s) in it.trace.hidden.spikes.row(t).iter().enumerate() {
                if s != 0.0 {
                    axpy(acc.w_out.row_mut(j).as_slice_mut().unwrap(), s, gi.as_slice().unwrap());
                }
            }
        }

        // dL/dS_hidden(t): readout, recurrence into t+1, regularizers
        general_mat_mul(1.0, &gi_o, &net.w_out, 0.0, &mut gs_h);
        if let Some(v) = &net.v_rec {
            general_mat_mul(1.0, &gi_h, v, 1.0, &mut gs_h);
        }

        for (n, it) in items.iter().enumerate() {
            let tr = &it.trace.hidden;
            let (mut gi, mut gu) = (gi_h.row_mut(n), gu_h.row_mut(n));
            let gs = gs_h.row(n);
            for i in 0..h {
                let reset_prev = if t > 0 { tr.fired[[t - 1, i]] } else { 0.0 };
                let g = (gs[i] + it.g_hidden[i]) * surrogate_grad(tr.voltage[[t, i]] - ph.firing_threshold, scale)
                    + ph.beta * (1.0 - tr.fired[[t, i]]) * gu[i];
                gu[i] = g;
                gi[i] = g * (1.0 - reset_prev) + ph.alpha * gi[i];
            }
            let gi = gi.as_slice().unwrap();
            for &j in &active[n][t] {
                axpy(acc.w_in.row_mut(j as usize).as_slice_mut().unwrap(), 1.0, gi);
            }
            if let (Some(dv), true) = (acc.v_rec.as_mut(), t > 0) {
                for (j, &s) in tr.spikes.row(t - 1).iter().enumerate() {
                    if s != 0.0 {
                        axpy(dv.row_mut(j).as_slice_mut().unwrap(), s, gi);
                    }
                }
            }
        }
    }
    Ok(())
}

/// Exact surrogate gradients of the total batch loss.
///
/// `batch` pairs each (copy-expanded) input with the trace its forward pass
/// produced; labels come from the inputs.
pub fn backward(
    net: &NetworkDef,
    batch: &[(&BinnedSpikeTensor, &ForwardTrace)],
    scale: f64,
    reg: &RegParams,
) -> Result<(GradientSet, LossBreakdown)> {
    let n_batch = batch.len();
    if n_batch == 0 {
        return Ok((GradientSet::zeros_like(net), LossBreakdown::default()));
    }
    let labels: Vec<usize> = batch.iter().map(|(x, _)| x.label()).collect();
    let out_counts: Vec<Vec<f64>> = batch.iter().map(|(_, tr)| tr.output_counts.clone()).collect();
    let hid_counts: Vec<Vec<f64>> = batch.iter().map(|(_, tr)| tr.hidden_counts.clone()).collect();
    let n_steps = batch[0].1.n_steps();
    let loss = loss_breakdown(&out_counts, &hid_counts, &labels, n_steps, reg)?;

    let mut acc = TransposedGrads::new(net);
    let items: Vec<SampleGrad<'_>> = batch
        .iter()
        .map(|&(input, trace)| SampleGrad {
            input,
            trace,
            g_counts: cross_entropy_grad(&trace.output_counts, input.label(), n_batch),
            g_hidden: reg_grad_hidden(&trace.hidden_counts, trace.n_steps(), n_batch, reg),
        })
        .collect();
    backward_chunk(net, &items, scale, &mut acc)?;
    let grads = acc.into_gradients();
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradients"));
    }
    Ok((grads, loss))
}
