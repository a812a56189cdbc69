//! Sigma-delta event encoding of frame-based taxel recordings.
//!
//! A [`FrameSequence`] is converted to an [`EventStream`] of ON/OFF level
//! crossings, which can be reconstructed back to a frame-shaped signal or
//! discretized into a clock-driven [`BinnedSpikeTensor`] for the networks.
//!
//! Channel layout of binned tensors is interleaved: channel `2 * taxel` is the
//! ON channel of a taxel, `2 * taxel + 1` its OFF channel.

pub mod analysis;
pub mod io;

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use analysis::{analyze_encoding, EncodingReport, IsiHistogram};

/// Default number of timestamp ticks per frame interval.
pub const DEFAULT_INTERPOLATION_RESOLUTION: u32 = 1000;

/// Tolerance used when mapping times onto bin indices, in units of bins.
const BIN_EPS: f64 = 1e-9;

/// One recorded sample: per-taxel readings at a fixed sampling rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSequence {
    /// `[n_taxels × n_frames]`, values in `[0, 255]`.
    values: Array2<f64>,
    sampling_rate_hz: f64,
    label: usize,
}

impl FrameSequence {
    pub fn new(values: Array2<f64>, sampling_rate_hz: f64, label: usize) -> Result<Self> {
        let seq = FrameSequence {
            values,
            sampling_rate_hz,
            label,
        };
        seq.validate()?;
        Ok(seq)
    }

    /// Build from frame-major rows (`frames[k][taxel]`), the on-disk order.
    pub fn from_frames(frames: &[Vec<f64>], sampling_rate_hz: f64, label: usize) -> Result<Self> {
        let n_frames = frames.len();
        let n_taxels = frames.first().map_or(0, Vec::len);
        if frames.iter().any(|f| f.len() != n_taxels) {
            return Err(Error::invalid("frames have inconsistent taxel counts"));
        }
        let values = Array2::from_shape_fn((n_taxels, n_frames), |(t, k)| frames[k][t]);
        Self::new(values, sampling_rate_hz, label)
    }

    pub fn validate(&self) -> Result<()> {
        let (n_taxels, n_frames) = self.values.dim();
        if n_taxels == 0 || n_frames == 0 {
            return Err(Error::invalid(format!(
                "frame sequence must have at least one taxel and frame, got {n_taxels}x{n_frames}"
            )));
        }
        if !(self.sampling_rate_hz.is_finite() && self.sampling_rate_hz > 0.0) {
            return Err(Error::invalid("sampling rate must be positive and finite"));
        }
        for &v in &self.values {
            if !v.is_finite() {
                return Err(Error::invalid("frame sequence contains non-finite values"));
            }
            if !(0.0..=255.0).contains(&v) {
                return Err(Error::invalid(format!("sensor value {v} outside [0, 255]")));
            }
        }
        Ok(())
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn taxel(&self, taxel: usize) -> ArrayView1<'_, f64> {
        self.values.row(taxel)
    }

    pub fn n_taxels(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.ncols()
    }

    pub fn sampling_rate_hz(&self) -> f64 {
        self.sampling_rate_hz
    }

    pub fn label(&self) -> usize {
        self.label
    }

    /// Recording length `n_frames / sampling_rate`.
    pub fn duration_s(&self) -> f64 {
        self.n_frames() as f64 / self.sampling_rate_hz
    }

    /// Keep only the first `n` frames.
    pub fn prefix(&self, n: usize) -> FrameSequence {
        let n = n.clamp(1, self.n_frames());
        FrameSequence {
            values: self.values.slice(ndarray::s![.., ..n]).to_owned(),
            sampling_rate_hz: self.sampling_rate_hz,
            label: self.label,
        }
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = label;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Level-crossing threshold ϑ in sensor units.
    pub threshold: f64,
    /// Timestamp ticks per frame interval.
    pub interpolation_resolution: u32,
}

impl EncoderConfig {
    pub fn new(threshold: f64) -> Self {
        EncoderConfig {
            threshold,
            interpolation_resolution: DEFAULT_INTERPOLATION_RESOLUTION,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(Error::invalid(format!(
                "encoding threshold must be positive, got {}",
                self.threshold
            )));
        }
        if self.interpolation_resolution < 1 {
            return Err(Error::invalid("interpolation resolution must be >= 1"));
        }
        Ok(())
    }

    /// Time of `tick` ticks past the start of the recording.
    fn tick_time(&self, tick: u64, sampling_rate_hz: f64) -> f64 {
        tick as f64 / (self.interpolation_resolution as f64 * sampling_rate_hz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    On,
    Off,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::On => 1.0,
            Polarity::Off => -1.0,
        }
    }

    pub fn offset(self) -> usize {
        match self {
            Polarity::On => 0,
            Polarity::Off => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time_s: f64,
    pub taxel: u16,
    pub polarity: Polarity,
}

impl Event {
    pub fn channel(&self) -> usize {
        2 * self.taxel as usize + self.polarity.offset()
    }
}

/// Time-sorted ON/OFF events of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStream {
    events: Vec<Event>,
    duration_s: f64,
    n_taxels: usize,
    label: usize,
}

impl EventStream {
    /// Sorts the events and checks every invariant.
    pub fn new(mut events: Vec<Event>, duration_s: f64, n_taxels: usize, label: usize) -> Result<Self> {
        if !(duration_s.is_finite() && duration_s >= 0.0) {
            return Err(Error::invalid("stream duration must be finite and non-negative"));
        }
        for e in &events {
            if !e.time_s.is_finite() || e.time_s < 0.0 || e.time_s > duration_s {
                return Err(Error::invalid(format!(
                    "event time {} outside [0, {duration_s}]",
                    e.time_s
                )));
            }
            if e.taxel as usize >= n_taxels {
                return Err(Error::invalid(format!(
                    "event taxel {} >= n_taxels {n_taxels}",
                    e.taxel
                )));
            }
        }
        sort_events(&mut events);
        Ok(EventStream {
            events,
            duration_s,
            n_taxels,
            label,
        })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }

    pub fn n_taxels(&self) -> usize {
        self.n_taxels
    }

    pub fn n_channels(&self) -> usize {
        2 * self.n_taxels
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn count(&self, polarity: Polarity) -> usize {
        self.events.iter().filter(|e| e.polarity == polarity).count()
    }

    /// Event counts per channel (interleaved ON/OFF layout).
    pub fn channel_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_channels()];
        for e in &self.events {
            counts[e.channel()] += 1;
        }
        counts
    }
}

fn sort_events(events: &mut [Event]) {
    events.sort_by(|a, b| {
        a.time_s
            .total_cmp(&b.time_s)
            .then(a.taxel.cmp(&b.taxel))
            .then(a.polarity.cmp(&b.polarity))
    });
}

/// Sigma-delta encoding: every time the linearly interpolated signal of a
/// taxel moves a full `threshold` away from its tracked level, an event is
/// emitted and the level follows by one threshold step.
///
/// Event times are quantized to `interpolation_resolution` ticks per frame
/// interval, rounding up, so an event never precedes its crossing and a
/// crossing reached exactly at a frame lands on that frame's time.
pub fn encode(seq: &FrameSequence, cfg: &EncoderConfig) -> Result<EventStream> {
    cfg.validate()?;
    seq.validate()?;
    let res = cfg.interpolation_resolution as u64;
    let fs = seq.sampling_rate_hz();
    let theta = cfg.threshold;
    let mut events = Vec::new();

    for taxel in 0..seq.n_taxels() {
        let signal = seq.taxel(taxel);
        let mut level = signal[0];
        for k in 1..signal.len() {
            let (v0, v1) = (signal[k - 1], signal[k]);
            if v1 == v0 {
                continue;
            }
            let rising = v1 > v0;
            loop {
                let next = if rising { level + theta } else { level - theta };
                let crossed = if rising { v1 >= next } else { v1 <= next };
                if !crossed {
                    break;
                }
                let frac = ((next - v0) / (v1 - v0)).clamp(0.0, 1.0);
                let tick = ((frac * res as f64).ceil() as u64).clamp(1, res);
                events.push(Event {
                    time_s: cfg.tick_time((k as u64 - 1) * res + tick, fs),
                    taxel: taxel as u16,
                    polarity: if rising { Polarity::On } else { Polarity::Off },
                });
                level = next;
            }
        }
    }

    sort_events(&mut events);
    Ok(EventStream {
        events,
        duration_s: seq.duration_s(),
        n_taxels: seq.n_taxels(),
        label: seq.label(),
    })
}

/// Frame sample times on the encoder's tick grid, so that an event placed on
/// a frame boundary compares equal to that frame's time.
fn frame_times(cfg: &EncoderConfig, n_frames: usize, sampling_rate_hz: f64) -> Vec<f64> {
    let res = cfg.interpolation_resolution as u64;
    (0..n_frames as u64)
        .map(|k| cfg.tick_time(k * res, sampling_rate_hz))
        .collect()
}

/// Integrate events into a staircase signal starting at 0, stepping by
/// `±threshold` per event, sampled at the frame times.
///
/// Returns a `[n_taxels × n_frames]` matrix.
pub fn reconstruct(
    stream: &EventStream,
    cfg: &EncoderConfig,
    n_frames: usize,
    sampling_rate_hz: f64,
) -> Result<Array2<f64>> {
    cfg.validate()?;
    let times = frame_times(cfg, n_frames, sampling_rate_hz);
    reconstruct_at(
        stream.n_taxels(),
        stream.events().iter().map(|e| (e.time_s, e.taxel as usize, e.polarity)),
        cfg.threshold,
        &times,
    )
}

/// Shared staircase integration; `events` must be time-sorted.
pub(crate) fn reconstruct_at(
    n_taxels: usize,
    events: impl Iterator<Item = (f64, usize, Polarity)>,
    threshold: f64,
    frame_times: &[f64],
) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((n_taxels, frame_times.len()));
    let mut level = vec![0.0; n_taxels];
    let mut events = events.peekable();
    for (k, &t) in frame_times.iter().enumerate() {
        while let Some(&(time, taxel, pol)) = events.peek() {
            if time > t {
                break;
            }
            if taxel >= n_taxels {
                return Err(Error::invalid(format!("event taxel {taxel} >= {n_taxels}")));
            }
            level[taxel] += pol.sign() * threshold;
            events.next();
        }
        for (taxel, &l) in level.iter().enumerate() {
            out[[taxel, k]] = l;
        }
    }
    Ok(out)
}

/// Mean of squared elementwise differences.
pub fn mse(original: &Array2<f64>, reconstructed: &Array2<f64>) -> Result<f64> {
    if original.dim() != reconstructed.dim() {
        return Err(Error::shape(
            format!("{:?}", original.dim()),
            format!("{:?}", reconstructed.dim()),
        ));
    }
    if original.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = original
        .iter()
        .zip(reconstructed.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / original.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinningConfig {
    pub time_bin_size_ms: f64,
}

impl BinningConfig {
    pub fn new(time_bin_size_ms: f64) -> Self {
        BinningConfig { time_bin_size_ms }
    }

    /// Number of whole bins in `duration_s`; a trailing partial bin is dropped.
    pub fn n_bins(&self, duration_s: f64) -> usize {
        (duration_s * 1000.0 / self.time_bin_size_ms + BIN_EPS).floor().max(0.0) as usize
    }

    /// Half-open bin index of a time; boundary times belong to the later bin.
    pub fn bin_index(&self, time_s: f64) -> usize {
        (time_s * 1000.0 / self.time_bin_size_ms + BIN_EPS).floor().max(0.0) as usize
    }
}

/// Binary `[T × channels]` spike raster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedSpikeTensor {
    bits: Array2<u8>,
    time_bin_size_ms: f64,
    label: usize,
}

impl BinnedSpikeTensor {
    pub fn new(bits: Array2<u8>, time_bin_size_ms: f64, label: usize) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::invalid("spike tensor entries must be 0 or 1"));
        }
        Ok(BinnedSpikeTensor {
            bits,
            time_bin_size_ms,
            label,
        })
    }

    pub fn zeros(n_steps: usize, n_channels: usize, time_bin_size_ms: f64, label: usize) -> Self {
        BinnedSpikeTensor {
            bits: Array2::zeros((n_steps, n_channels)),
            time_bin_size_ms,
            label,
        }
    }

    pub fn bits(&self) -> &Array2<u8> {
        &self.bits
    }

    pub fn n_steps(&self) -> usize {
        self.bits.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.bits.ncols()
    }

    pub fn time_bin_size_ms(&self) -> f64 {
        self.time_bin_size_ms
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn set(&mut self, step: usize, channel: usize) {
        self.bits[[step, channel]] = 1;
    }

    pub fn get(&self, step: usize, channel: usize) -> bool {
        self.bits[[step, channel]] != 0
    }

    pub fn total_spikes(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    /// Indices of active channels per time step.
    pub fn active(&self) -> Vec<Vec<u32>> {
        self.bits
            .axis_iter(Axis(0))
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &b)| b != 0)
                    .map(|(c, _)| c as u32)
                    .collect()
            })
            .collect()
    }

    /// The first `n_steps` bins.
    pub fn prefix(&self, n_steps: usize) -> BinnedSpikeTensor {
        let n = n_steps.min(self.n_steps());
        BinnedSpikeTensor {
            bits: self.bits.slice(ndarray::s![..n, ..]).to_owned(),
            time_bin_size_ms: self.time_bin_size_ms,
            label: self.label,
        }
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = label;
        self
    }
}

/// Discretize a stream into `T = floor(duration / bin)` bins per channel;
/// a bit is set when at least one event of that channel falls in the bin.
pub fn bin_events(stream: &EventStream, cfg: &BinningConfig) -> Result<BinnedSpikeTensor> {
    if !(cfg.time_bin_size_ms.is_finite() && cfg.time_bin_size_ms > 0.0) {
        return Err(Error::invalid("time bin size must be positive"));
    }
    let n_steps = cfg.n_bins(stream.duration_s());
    let mut out =
        BinnedSpikeTensor::zeros(n_steps, stream.n_channels(), cfg.time_bin_size_ms, stream.label());
    for e in stream.events() {
        let t = cfg.bin_index(e.time_s);
        if t < n_steps {
            out.set(t, e.channel());
        }
    }
    Ok(out)
}

/// Replicate all channels `copies` times, block after block.
pub fn input_copies(tensor: &BinnedSpikeTensor, copies: usize) -> Result<BinnedSpikeTensor> {
    if copies == 0 {
        return Err(Error::invalid("nb_input_copies must be >= 1"));
    }
    let c = tensor.n_channels();
    let bits = Array2::from_shape_fn((tensor.n_steps(), c * copies), |(t, j)| {
        tensor.bits[[t, j % c]]
    });
    Ok(BinnedSpikeTensor {
        bits,
        time_bin_size_ms: tensor.time_bin_size_ms,
        label: tensor.label,
    })
}
