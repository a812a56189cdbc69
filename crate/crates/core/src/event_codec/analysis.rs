//! Encoding-quality statistics over a dataset: event budgets, compression
//! ratio against the unit-threshold encoding, reconstruction error before and
//! after time binning, binning event loss and inter-spike intervals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    bin_events, encode, mse, reconstruct, reconstruct_at, BinnedSpikeTensor, BinningConfig,
    EncoderConfig, EventStream, FrameSequence, Polarity,
};
use crate::error::{Error, Result};

/// Width of one ISI histogram bin.
pub const ISI_BIN_S: f64 = 1e-3;

/// Pooled per-channel inter-spike interval histogram with fixed-width bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsiHistogram {
    pub bin_width_s: f64,
    /// `(lower edge in seconds, count)`.
    pub bins: Vec<(f64, u64)>,
    pub total_intervals: u64,
    pub total_events: u64,
}

impl IsiHistogram {
    pub fn from_streams<'a>(streams: impl IntoIterator<Item = &'a EventStream>, bin_width_s: f64) -> Self {
        let mut counts: Vec<u64> = Vec::new();
        let mut total_intervals = 0;
        let mut total_events = 0;
        for s in streams {
            total_events += s.len() as u64;
            let mut last = vec![None::<f64>; s.n_channels()];
            for e in s.events() {
                let ch = e.channel();
                if let Some(prev) = last[ch] {
                    let idx = ((e.time_s - prev) / bin_width_s).floor() as usize;
                    if counts.len() <= idx {
                        counts.resize(idx + 1, 0);
                    }
                    counts[idx] += 1;
                    total_intervals += 1;
                }
                last[ch] = Some(e.time_s);
            }
        }
        IsiHistogram {
            bin_width_s,
            bins: counts
                .into_iter()
                .enumerate()
                .map(|(i, c)| (i as f64 * bin_width_s, c))
                .collect(),
            total_intervals,
            total_events,
        }
    }

    /// Intervals shorter than `limit_s`, as a fraction of all events.
    pub fn fraction_below(&self, limit_s: f64) -> f64 {
        if self.total_events == 0 {
            return 0.0;
        }
        let below: u64 = self
            .bins
            .iter()
            .filter(|(lo, _)| lo + self.bin_width_s <= limit_s + 1e-15)
            .map(|(_, c)| c)
            .sum();
        below as f64 / self.total_events as f64
    }

    pub fn is_empty(&self) -> bool {
        self.total_intervals == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingReport {
    pub threshold: f64,
    pub time_bin_size_ms: f64,
    pub mean_events_per_sample: f64,
    /// Events at ϑ = 1 divided by events at this threshold.
    pub compression_ratio: f64,
    pub reconstruction_mse: f64,
    pub mean_events_after_binning: f64,
    pub compression_ratio_after_binning: f64,
    pub reconstruction_mse_after_binning: f64,
    /// `1 - set bits / events`.
    pub events_lost_fraction: f64,
    pub isi_below_1ms_fraction: f64,
    pub isi_histogram: IsiHistogram,
}

/// Events of a binned tensor as if emitted at each bin's start time.
fn binned_events(t: &BinnedSpikeTensor) -> Vec<(f64, usize, Polarity)> {
    let bin_s = t.time_bin_size_ms() / 1000.0;
    let mut out = Vec::new();
    for step in 0..t.n_steps() {
        for ch in 0..t.n_channels() {
            if t.get(step, ch) {
                let pol = if ch % 2 == 0 { Polarity::On } else { Polarity::Off };
                out.push((step as f64 * bin_s, ch / 2, pol));
            }
        }
    }
    out
}

/// Staircase reconstruction from a binned tensor, each set bit counted once
/// at its bin start.
pub fn reconstruct_binned(
    tensor: &BinnedSpikeTensor,
    cfg: &EncoderConfig,
    n_frames: usize,
    sampling_rate_hz: f64,
) -> Result<ndarray::Array2<f64>> {
    if !tensor.n_channels().is_multiple_of(2) {
        return Err(Error::invalid("binned tensor must have ON/OFF channel pairs"));
    }
    let times: Vec<f64> = (0..n_frames).map(|k| k as f64 / sampling_rate_hz).collect();
    reconstruct_at(
        tensor.n_channels() / 2,
        binned_events(tensor).into_iter(),
        cfg.threshold,
        &times,
    )
}

struct SampleStats {
    events: usize,
    mse: f64,
}

fn encode_all(dataset: &[FrameSequence], cfg: &EncoderConfig) -> Result<Vec<(EventStream, SampleStats)>> {
    dataset
        .par_iter()
        .map(|seq| {
            let stream = encode(seq, cfg)?;
            let rec = reconstruct(&stream, cfg, seq.n_frames(), seq.sampling_rate_hz())?;
            let stats = SampleStats {
                events: stream.len(),
                mse: mse(seq.values(), &rec)?,
            };
            Ok((stream, stats))
        })
        .collect()
}

/// Mean events per sample at a threshold, before binning.
pub fn mean_events(dataset: &[FrameSequence], cfg: &EncoderConfig) -> Result<f64> {
    let total: usize = dataset
        .par_iter()
        .map(|s| encode(s, cfg).map(|e| e.len()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(total as f64 / dataset.len().max(1) as f64)
}

/// One report per `(threshold, bin size)` pair, thresholds outermost.
///
/// `thresholds` must contain 1.0, the reference for the compression ratio.
pub fn analyze_encoding(
    dataset: &[FrameSequence],
    thresholds: &[f64],
    bin_sizes_ms: &[f64],
    interpolation_resolution: u32,
) -> Result<Vec<EncodingReport>> {
    if thresholds.is_empty() || bin_sizes_ms.is_empty() {
        return Err(Error::invalid("thresholds and bin sizes must be non-empty"));
    }
    if !thresholds.contains(&1.0) {
        return Err(Error::invalid("thresholds must include 1 as the compression reference"));
    }
    if dataset.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    let n = dataset.len() as f64;
    let cfg_for = |theta: f64| EncoderConfig {
        threshold: theta,
        interpolation_resolution,
    };

    let reference_events = encode_all(dataset, &cfg_for(1.0))?
        .iter()
        .map(|(_, s)| s.events)
        .sum::<usize>() as f64;

    let mut reports = Vec::new();
    for &theta in thresholds {
        let cfg = cfg_for(theta);
        let encoded = encode_all(dataset, &cfg)?;
        let total_events: usize = encoded.iter().map(|(_, s)| s.events).sum();
        let mean_mse = encoded.iter().map(|(_, s)| s.mse).sum::<f64>() / n;
        let isi = IsiHistogram::from_streams(encoded.iter().map(|(e, _)| e), ISI_BIN_S);

        for &bin in bin_sizes_ms {
            let bcfg = BinningConfig::new(bin);
            let per_sample: Vec<(usize, f64)> = encoded
                .par_iter()
                .zip(dataset.par_iter())
                .map(|((stream, _), seq)| {
                    let b = bin_events(stream, &bcfg)?;
                    let rec = reconstruct_binned(&b, &cfg, seq.n_frames(), seq.sampling_rate_hz())?;
                    Ok((b.total_spikes(), mse(seq.values(), &rec)?))
                })
                .collect::<Result<_>>()?;
            let total_bits: usize = per_sample.iter().map(|p| p.0).sum();
            let binned_mse = per_sample.iter().map(|p| p.1).sum::<f64>() / n;

            reports.push(EncodingReport {
                threshold: theta,
                time_bin_size_ms: bin,
                mean_events_per_sample: total_events as f64 / n,
                compression_ratio: ratio(reference_events, total_events as f64),
                reconstruction_mse: mean_mse,
                mean_events_after_binning: total_bits as f64 / n,
                compression_ratio_after_binning: ratio(reference_events, total_bits as f64),
                reconstruction_mse_after_binning: binned_mse,
                events_lost_fraction: if total_events == 0 {
                    0.0
                } else {
                    1.0 - total_bits as f64 / total_events as f64
                },
                isi_below_1ms_fraction: isi.fraction_below(1e-3),
                isi_histogram: isi.clone(),
            });
        }
    }
    Ok(reports)
}

fn ratio(reference: f64, count: f64) -> f64 {
    if count == 0.0 {
        f64::INFINITY
    } else {
        reference / count
    }
}
