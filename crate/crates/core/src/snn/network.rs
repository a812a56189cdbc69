use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::lif::{heaviside, LifParams};
use crate::container::Container;
use crate::error::{Error, Result};
use crate::event_codec::BinnedSpikeTensor;

/// Two-layer spiking network: a LIF hidden layer with optional all-to-all
/// recurrence feeding a LIF readout layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDef {
    /// `[hidden × inputs]`
    pub w_in: Array2<f64>,
    /// `[hidden × hidden]`, row = target, column = source.
    pub v_rec: Option<Array2<f64>>,
    /// `[outputs × hidden]`
    pub w_out: Array2<f64>,
    pub lif_hidden: LifParams,
    pub lif_out: LifParams,
}

impl NetworkDef {
    pub fn new(
        w_in: Array2<f64>,
        v_rec: Option<Array2<f64>>,
        w_out: Array2<f64>,
        lif_hidden: LifParams,
        lif_out: LifParams,
    ) -> Result<Self> {
        let net = NetworkDef {
            w_in,
            v_rec,
            w_out,
            lif_hidden,
            lif_out,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn zeros(n_inputs: usize, hidden: usize, n_outputs: usize, recurrent: bool, lif: LifParams) -> Self {
        NetworkDef {
            w_in: Array2::zeros((hidden, n_inputs)),
            v_rec: recurrent.then(|| Array2::zeros((hidden, hidden))),
            w_out: Array2::zeros((n_outputs, hidden)),
            lif_hidden: lif,
            lif_out: lif,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden_size();
        if self.w_out.ncols() != h {
            return Err(Error::shape(format!("w_out with {h} columns"), self.w_out.ncols()));
        }
        if let Some(v) = &self.v_rec {
            if v.dim() != (h, h) {
                return Err(Error::shape(format!("v_rec {h}x{h}"), format!("{:?}", v.dim())));
            }
        }
        let all = self
            .w_in
            .iter()
            .chain(self.w_out.iter())
            .chain(self.v_rec.iter().flat_map(|v| v.iter()));
        for w in all {
            if !w.is_finite() {
                return Err(Error::NonFinite("network weights"));
            }
        }
        Ok(())
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

    /// Postsynaptic targets of one hidden spike.
    pub fn hidden_fanout(&self) -> usize {
        self.n_outputs() + if self.is_recurrent() { self.hidden_size() } else { 0 }
    }

    pub fn n_parameters(&self) -> usize {
        self.w_in.len() + self.w_out.len() + self.v_rec.as_ref().map_or(0, |v| v.len())
    }

    /// Serialize into the named-dataset container.
    ///
    /// Datasets: `kind` = "network", `recurrent` (i64 0/1), `w_in`, `v_rec`
    /// (only if recurrent), `w_out`, and for each of `hidden` / `out` the
    /// scalars `<layer>.tau_mem_ms`, `<layer>.tau_syn_ms`,
    /// `<layer>.time_bin_size_ms`, `<layer>.alpha`, `<layer>.beta`,
    /// `<layer>.firing_threshold`.
    pub fn to_container(&self) -> Container {
        let mut c = Container::new();
        c.put_text("kind", "network");
        c.put_int("recurrent", self.is_recurrent() as i64);
        put_matrix(&mut c, "w_in", &self.w_in);
        if let Some(v) = &self.v_rec {
            put_matrix(&mut c, "v_rec", v);
        }
        put_matrix(&mut c, "w_out", &self.w_out);
        put_lif(&mut c, "hidden", &self.lif_hidden);
        put_lif(&mut c, "out", &self.lif_out);
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.text("kind")? != "network" {
            return Err(Error::parse("container does not hold a float network"));
        }
        let v_rec = if c.int("recurrent")? != 0 {
            Some(get_matrix(c, "v_rec")?)
        } else {
            None
        };
        NetworkDef::new(
            get_matrix(c, "w_in")?,
            v_rec,
            get_matrix(c, "w_out")?,
            get_lif(c, "hidden")?,
            get_lif(c, "out")?,
        )
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_container().to_bytes())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_container(&Container::from_bytes(&std::fs::read(path)?)?)
    }
}

fn put_matrix(c: &mut Container, name: &str, m: &Array2<f64>) {
    let (r, k) = m.dim();
    c.put_f64(name, &[r, k], m.iter().copied().collect());
}

fn get_matrix(c: &Container, name: &str) -> Result<Array2<f64>> {
    let (dims, data) = c.f64s(name)?;
    if dims.len() != 2 {
        return Err(Error::parse(format!("`{name}` must be 2-D")));
    }
    Array2::from_shape_vec((dims[0], dims[1]), data.to_vec()).map_err(|e| Error::parse(e.to_string()))
}

fn put_lif(c: &mut Container, layer: &str, p: &LifParams) {
    c.put_scalar(&format!("{layer}.tau_mem_ms"), p.tau_mem_ms);
    c.put_scalar(&format!("{layer}.tau_syn_ms"), p.tau_syn_ms);
    c.put_scalar(&format!("{layer}.time_bin_size_ms"), p.time_bin_size_ms);
    c.put_scalar(&format!("{layer}.alpha"), p.alpha);
    c.put_scalar(&format!("{layer}.beta"), p.beta);
    c.put_scalar(&format!("{layer}.firing_threshold"), p.firing_threshold);
}

fn get_lif(c: &Container, layer: &str) -> Result<LifParams> {
    let g = |k: &str| c.scalar(&format!("{layer}.{k}"));
    Ok(LifParams {
        tau_mem_ms: g("tau_mem_ms")?,
        tau_syn_ms: g("tau_syn_ms")?,
        time_bin_size_ms: g("time_bin_size_ms")?,
        alpha: g("alpha")?,
        beta: g("beta")?,
        firing_threshold: g("firing_threshold")?,
    })
}

/// Spike nonlinearity used in the forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpikeFn {
    /// Binary spikes, the inference and training forward pass.
    Heaviside,
    /// Spikes replaced by the fast sigmoid `x / (1 + λ|x|)` of the threshold
    /// distance; reset still follows the binary spike. Its exact derivative
    /// equals the surrogate gradient, which makes it a finite-difference
    /// reference for the backward pass.
    FastSigmoid { scale: f64 },
}

impl SpikeFn {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            SpikeFn::Heaviside => heaviside(x),
            SpikeFn::FastSigmoid { scale } => x / (1.0 + scale * x.abs()),
        }
    }
}

/// Recorded dynamics of one layer, all `[T × n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    pub current: Array2<f64>,
    pub voltage: Array2<f64>,
    /// Values passed downstream (binary under [`SpikeFn::Heaviside`]).
    pub spikes: Array2<f64>,
    /// Binary threshold crossings driving the reset.
    pub fired: Array2<f64>,
}

impl LayerTrace {
    fn zeros(t: usize, n: usize) -> Self {
        LayerTrace {
            current: Array2::zeros((t, n)),
            voltage: Array2::zeros((t, n)),
            spikes: Array2::zeros((t, n)),
            fired: Array2::zeros((t, n)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub hidden: LayerTrace,
    pub output: LayerTrace,
    /// Column sums of the output spikes.
    pub output_counts: Vec<f64>,
    /// Column sums of the hidden spikes.
    pub hidden_counts: Vec<f64>,
    pub input_spikes: usize,
}

impl ForwardTrace {
    pub fn n_steps(&self) -> usize {
        self.hidden.spikes.nrows()
    }

    pub fn hidden_spike_total(&self) -> f64 {
        self.hidden_counts.iter().sum()
    }

    pub fn output_spike_total(&self) -> f64 {
        self.output_counts.iter().sum()
    }
}

/// Spike totals of a forward pass run without recording the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeSummary {
    pub output_counts: Vec<f64>,
    pub hidden_counts: Vec<f64>,
    pub input_spikes: usize,
}

/// Transposed copies so that presynaptic spikes add contiguous rows.
struct Transposed {
    w_in: Array2<f64>,
    v_rec: Option<Array2<f64>>,
    w_out: Array2<f64>,
}

impl Transposed {
    fn of(net: &NetworkDef) -> Self {
        Transposed {
            w_in: net.w_in.t().as_standard_layout().into_owned(),
            v_rec: net.v_rec.as_ref().map(|v| v.t().as_standard_layout().into_owned()),
            w_out: net.w_out.t().as_standard_layout().into_owned(),
        }
    }
}

#[inline]
fn axpy(acc: &mut [f64], a: f64, x: &[f64]) {
    for (y, &v) in acc.iter_mut().zip(x) {
        *y += a * v;
    }
}

/// One fused LIF update over a layer. `drive` holds the new synaptic input
/// and is overwritten with the new current.
#[inline]
fn lif_update(
    p: &LifParams,
    spike_fn: SpikeFn,
    current: &mut [f64],
    voltage: &mut [f64],
    fired: &mut [f64],
    spikes: &mut [f64],
    drive: &[f64],
) {
    let theta = p.firing_threshold;
    for i in 0..current.len() {
        let c = p.alpha * current[i] + drive[i];
        let v = (p.beta * voltage[i] + c) * (1.0 - fired[i]);
        current[i] = c;
        voltage[i] = v;
        fired[i] = heaviside(v - theta);
        spikes[i] = spike_fn.apply(v - theta);
    }
}

fn check_input(net: &NetworkDef, input: &BinnedSpikeTensor) -> Result<()> {
    if input.n_channels() != net.n_inputs() {
        return Err(Error::shape(
            format!("{} input channels", net.n_inputs()),
            input.n_channels(),
        ));
    }
    Ok(())
}

fn run(
    net: &NetworkDef,
    input: &BinnedSpikeTensor,
    spike_fn: SpikeFn,
    mut record: Option<&mut ForwardTrace>,
) -> Result<SpikeSummary> {
    check_input(net, input)?;
    let tw = Transposed::of(net);
    let (h, o) = (net.hidden_size(), net.n_outputs());
    let active = input.active();

    let (mut hc, mut hv, mut hf, mut hs) = (vec![0.0; h], vec![0.0; h], vec![0.0; h], vec![0.0; h]);
    let (mut oc, mut ov, mut of, mut os) = (vec![0.0; o], vec![0.0; o], vec![0.0; o], vec![0.0; o]);
    let mut drive_h = vec![0.0; h];
    let mut drive_o = vec![0.0; o];
    let mut hidden_counts = vec![0.0; h];
    let mut output_counts = vec![0.0; o];
    let mut input_spikes = 0;

    for (t, act) in active.iter().enumerate() {
        drive_h.iter_mut().for_each(|x| *x = 0.0);
        for &j in act {
            axpy(&mut drive_h, 1.0, tw.w_in.row(j as usize).as_slice().unwrap());
        }
        input_spikes += act.len();
        if let Some(vt) = &tw.v_rec {
            for (j, &s) in hs.iter().enumerate() {
                if s != 0.0 {
                    axpy(&mut drive_h, s, vt.row(j).as_slice().unwrap());
                }
            }
        }
        lif_update(&net.lif_hidden, spike_fn, &mut hc, &mut hv, &mut hf, &mut hs, &drive_h);

        drive_o.iter_mut().for_each(|x| *x = 0.0);
        for (j, &s) in hs.iter().enumerate() {
            if s != 0.0 {
                axpy(&mut drive_o, s, tw.w_out.row(j).as_slice().unwrap());
            }
        }
        lif_update(&net.lif_out, spike_fn, &mut oc, &mut ov, &mut of, &mut os, &drive_o);

        axpy(&mut hidden_counts, 1.0, &hs);
        axpy(&mut output_counts, 1.0, &os);

        if let Some(tr) = record.as_deref_mut() {
            for (layer, c, v, f, s) in [
                (&mut tr.hidden, &hc, &hv, &hf, &hs),
                (&mut tr.output, &oc, &ov, &of, &os),
            ] {
                layer.current.row_mut(t).assign(&ArrayView1::from(c.as_slice()));
                layer.voltage.row_mut(t).assign(&ArrayView1::from(v.as_slice()));
                layer.fired.row_mut(t).assign(&ArrayView1::from(f.as_slice()));
                layer.spikes.row_mut(t).assign(&ArrayView1::from(s.as_slice()));
            }
        }
    }
    if hc.iter().chain(&hv).chain(&oc).chain(&ov).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("network state"));
    }
    Ok(SpikeSummary {
        output_counts,
        hidden_counts,
        input_spikes,
    })
}

/// Simulate the network over all time steps of `input` from zero state and
/// record the full trace.
pub fn forward(net: &NetworkDef, input: &BinnedSpikeTensor) -> Result<ForwardTrace> {
    forward_with(net, input, SpikeFn::Heaviside)
}

pub fn forward_with(net: &NetworkDef, input: &BinnedSpikeTensor, spike_fn: SpikeFn) -> Result<ForwardTrace> {
    let t = input.n_steps();
    let mut trace = ForwardTrace {
        hidden: LayerTrace::zeros(t, net.hidden_size()),
        output: LayerTrace::zeros(t, net.n_outputs()),
        output_counts: vec![],
        hidden_counts: vec![],
        input_spikes: 0,
    };
    let summary = run(net, input, spike_fn, Some(&mut trace))?;
    trace.output_counts = summary.output_counts;
    trace.hidden_counts = summary.hidden_counts;
    trace.input_spikes = summary.input_spikes;
    Ok(trace)
}

/// Forward pass keeping only spike counts.
pub fn infer(net: &NetworkDef, input: &BinnedSpikeTensor) -> Result<SpikeSummary> {
    run(net, input, SpikeFn::Heaviside, None)
}

/// Index of the largest count; ties go to the lowest index.
pub fn argmax_count(counts: &[f64]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Winning output neuron of a trial.
pub fn predict(trace: &ForwardTrace) -> usize {
    argmax_count(&trace.output_counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn lif() -> LifParams {
        LifParams::from_decays(0.8, 0.9, 1.0).unwrap()
    }

    fn toy(recurrent: bool) -> NetworkDef {
        NetworkDef::new(
            array![[0.9, 0.4], [0.3, 1.1]],
            recurrent.then(|| array![[0.0, 0.5], [-0.6, 0.0]]),
            array![[1.2, -0.3], [0.2, 0.95]],
            lif(),
            LifParams::from_decays(0.7, 0.85, 1.0).unwrap(),
        )
        .unwrap()
    }

    fn input(rows: &[[u8; 2]]) -> BinnedSpikeTensor {
        let mut t = BinnedSpikeTensor::zeros(rows.len(), 2, 1.0, 0);
        for (s, r) in rows.iter().enumerate() {
            for (c, &b) in r.iter().enumerate() {
                if b == 1 {
                    t.set(s, c);
                }
            }
        }
        t
    }

    /// Scalar-loop reference simulation written directly from the update
    /// equations, independent of the vectorized kernel.
    fn reference(net: &NetworkDef, x: &[[u8; 2]]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let (h, o) = (net.hidden_size(), net.n_outputs());
        let (mut i1, mut u1, mut s1) = (vec![0.0; h], vec![0.0; h], vec![0.0; h]);
        let (mut i2, mut u2, mut s2) = (vec![0.0; o], vec![0.0; o], vec![0.0; o]);
        let (mut hs, mut os) = (vec![], vec![]);
        for row in x {
            let prev = s1.clone();
            for i in 0..h {
                let mut drive = 0.0;
                for j in 0..2 {
                    drive += net.w_in[[i, j]] * row[j] as f64;
                }
                if let Some(v) = &net.v_rec {
                    for j in 0..h {
                        drive += v[[i, j]] * prev[j];
                    }
                }
                i1[i] = net.lif_hidden.alpha * i1[i] + drive;
                u1[i] = (net.lif_hidden.beta * u1[i] + i1[i]) * (1.0 - prev[i]);
                s1[i] = if u1[i] >= 1.0 { 1.0 } else { 0.0 };
            }
            let prev_o = s2.clone();
            for k in 0..o {
                let mut drive = 0.0;
                for j in 0..h {
                    drive += net.w_out[[k, j]] * s1[j];
                }
                i2[k] = net.lif_out.alpha * i2[k] + drive;
                u2[k] = (net.lif_out.beta * u2[k] + i2[k]) * (1.0 - prev_o[k]);
                s2[k] = if u2[k] >= 1.0 { 1.0 } else { 0.0 };
            }
            hs.push(s1.clone());
            os.push(s2.clone());
        }
        (hs, os)
    }

    #[test]
    fn matches_scalar_reference() {
        let x = [[1, 0], [1, 1], [0, 1], [0, 0], [1, 1]];
        for recurrent in [false, true] {
            let net = toy(recurrent);
            let tr = forward(&net, &input(&x)).unwrap();
            let (hs, os) = reference(&net, &x);
            for t in 0..x.len() {
                assert_eq!(tr.hidden.spikes.row(t).to_vec(), hs[t]);
                assert_eq!(tr.output.spikes.row(t).to_vec(), os[t]);
            }
            assert!(tr.hidden_spike_total() > 0.0);
        }
    }

    #[test]
    fn three_step_toy_by_hand() {
        let net = NetworkDef::new(
            array![[1.5, 0.0], [0.0, 0.6]],
            None,
            array![[1.0, 0.0], [0.0, 2.0]],
            LifParams::from_decays(0.5, 0.5, 1.0).unwrap(),
            LifParams::from_decays(0.5, 0.5, 1.0).unwrap(),
        )
        .unwrap();
        let tr = forward(&net, &input(&[[1, 1], [0, 1], [0, 0]])).unwrap();
        // hidden 0: I=1.5,U=1.5 spike; I=.75,U=0 (reset); I=.375,U=.375
        // hidden 1: I=.6,U=.6; I=.9,U=1.2 spike; I=.45,U=0
        assert_eq!(tr.hidden.spikes, array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]);
        assert_eq!(tr.hidden.voltage.column(0).to_vec(), vec![1.5, 0.0, 0.375]);
        // output 0 driven by 1.0 at t=0 -> spike; output 1 by 2.0 at t=1 -> spike
        assert_eq!(tr.output.spikes, array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]);
        assert_eq!(tr.output_counts, vec![1.0, 1.0]);
        assert_eq!(predict(&tr), 0);
    }

    #[test]
    fn zero_input_is_silent() {
        let net = toy(true);
        let tr = forward(&net, &BinnedSpikeTensor::zeros(20, 2, 1.0, 0)).unwrap();
        assert!(tr.hidden.spikes.iter().all(|&s| s == 0.0));
        assert!(tr.output.voltage.iter().all(|&s| s == 0.0));
        assert_eq!(tr.output_counts, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_recurrence_equals_feedforward() {
        let x = input(&[[1, 0], [1, 1], [0, 1], [1, 1]]);
        let ff = toy(false);
        let mut rec = ff.clone();
        rec.v_rec = Some(Array2::zeros((2, 2)));
        assert_eq!(forward(&ff, &x).unwrap(), forward(&rec, &x).unwrap());
    }

    #[test]
    fn predict_tie_breaks_low() {
        assert_eq!(argmax_count(&[0.0, 5.0, 2.0]), 1);
        assert_eq!(argmax_count(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax_count(&[3.0, 3.0, 1.0]), 0);
    }

    #[test]
    fn counts_are_column_sums_and_infer_agrees() {
        let net = toy(true);
        let x = input(&[[1, 1], [1, 1], [1, 0], [0, 1], [1, 1], [0, 0]]);
        let tr = forward(&net, &x).unwrap();
        assert_eq!(tr.output_counts, tr.output.spikes.sum_axis(ndarray::Axis(0)).to_vec());
        assert_eq!(tr.hidden_counts, tr.hidden.spikes.sum_axis(ndarray::Axis(0)).to_vec());
        let s = infer(&net, &x).unwrap();
        assert_eq!(s.output_counts, tr.output_counts);
        assert_eq!(s.input_spikes, 8);
    }

    #[test]
    fn rejects_wrong_input_width() {
        assert!(forward(&toy(false), &BinnedSpikeTensor::zeros(3, 5, 1.0, 0)).is_err());
    }

    #[test]
    fn container_roundtrip() {
        let net = toy(true);
        let back = NetworkDef::from_container(&Container::from_bytes(&net.to_container().to_bytes()).unwrap()).unwrap();
        assert_eq!(back, net);
        let ff = toy(false);
        let back = NetworkDef::from_container(&ff.to_container()).unwrap();
        assert!(!back.is_recurrent());
    }
}
