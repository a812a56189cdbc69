use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_codec::{bin_events, encode, input_copies, BinnedSpikeTensor, BinningConfig, EncoderConfig, FrameSequence};
use crate::snn::NetworkDef;
use crate::train::{evaluate, TrainConfig};

/// Encode, bin and replicate every sample.
pub fn prepare_inputs(
    samples: &[FrameSequence],
    encoder: &EncoderConfig,
    time_bin_size_ms: f64,
    copies: usize,
) -> Result<Vec<BinnedSpikeTensor>> {
    let bin = BinningConfig::new(time_bin_size_ms);
    samples
        .par_iter()
        .map(|s| input_copies(&bin_events(&encode(s, encoder)?, &bin)?, copies))
        .collect()
}

/// Inputs as a training config expects them.
pub fn prepare_for(samples: &[FrameSequence], cfg: &TrainConfig) -> Result<Vec<BinnedSpikeTensor>> {
    prepare_inputs(samples, &EncoderConfig::new(cfg.threshold), cfg.time_bin_size, cfg.nb_input_copies)
}

/// Accuracy tolerance, in accuracy units, for "as good as the full window".
pub const TTC_TOLERANCE: f64 = 0.01;
pub const TTC_PROBES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtcResult {
    /// Probed prefix fractions, ascending, ending at 1.
    pub fractions: Vec<f64>,
    /// Accuracy on each prefix, as evaluated.
    pub accuracies: Vec<f64>,
    pub full_accuracy: f64,
    /// Smallest probed fraction within [`TTC_TOLERANCE`] of the full-window
    /// accuracy.
    pub ttc: f64,
}

/// Number of leading bins kept for a prefix fraction.
pub fn prefix_steps(n_steps: usize, fraction: f64) -> usize {
    ((fraction * n_steps as f64 - 1e-9).ceil() as usize).clamp(1, n_steps)
}

/// Time to classify with prefixes at `1/n_probes` increments of each
/// sample's bins.
pub fn compute_ttc(net: &NetworkDef, samples: &[&BinnedSpikeTensor], n_probes: usize) -> Result<TtcResult> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples to evaluate"));
    }
    if n_probes == 0 {
        return Err(Error::invalid("at least one probe is required"));
    }
    let fractions: Vec<f64> = (1..=n_probes).map(|k| k as f64 / n_probes as f64).collect();
    let accuracies = fractions
        .iter()
        .map(|&p| {
            let prefixes: Vec<BinnedSpikeTensor> = samples.iter().map(|s| s.prefix(prefix_steps(s.n_steps(), p))).collect();
            evaluate(net, &prefixes.iter().collect::<Vec<_>>())
        })
        .collect::<Result<Vec<f64>>>()?;
    let full_accuracy = *accuracies.last().expect("at least one probe");
    let ttc = fractions
        .iter()
        .zip(&accuracies)
        .find(|(_, &a)| a >= full_accuracy - TTC_TOLERANCE - 1e-12)
        .map(|(&p, _)| p)
        .expect("the full window always qualifies");
    Ok(TtcResult {
        fractions,
        accuracies,
        full_accuracy,
        ttc,
    })
}
