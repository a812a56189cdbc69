//! Linear one-vs-rest baselines on frame and event features.

pub mod linear;
pub mod pca;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use linear::{
    cross_validate, linear_fit, linear_predict, stratified_folds, CvResult, LinearConfig, LinearModel, Standardizer,
};
pub use pca::{pca_fit, pca_transform, Pca};

use crate::error::{Error, Result};
use crate::event_codec::{bin_events, encode, BinnedSpikeTensor, BinningConfig, EncoderConfig, EventStream, FrameSequence};

/// Per-taxel mean over time.
pub fn time_collapse(seq: &FrameSequence) -> Vec<f64> {
    (0..seq.n_taxels()).map(|i| seq.taxel(i).mean().unwrap_or(0.0)).collect()
}

/// All frames, flattened frame by frame.
pub fn raw_features(seq: &FrameSequence) -> Vec<f64> {
    seq.values().t().iter().copied().collect()
}

/// Event count per channel (`2·taxel` ON, `2·taxel + 1` OFF).
pub fn event_count_features(stream: &EventStream) -> Vec<f64> {
    stream.channel_counts().into_iter().map(|c| c as f64).collect()
}

/// All time bins, flattened step by step.
pub fn event_bin_features(tensor: &BinnedSpikeTensor) -> Vec<f64> {
    tensor.bits().iter().map(|&b| b as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub x: Array2<f64>,
    pub labels: Vec<usize>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::shape(rows.len(), labels.len()));
        }
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("feature rows differ in length"));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
        let x = Array2::from_shape_vec((labels.len(), d), flat).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(FeatureMatrix { x, labels })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMode {
    /// All frames, reduced by PCA.
    Raw,
    /// Per-taxel temporal means.
    Collapsed,
    /// 24 event counts.
    Events,
    /// Every binned event bit.
    EventBins,
}

impl std::str::FromStr for BaselineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(BaselineMode::Raw),
            "collapsed" => Ok(BaselineMode::Collapsed),
            "events" => Ok(BaselineMode::Events),
            "event-bins" | "bins" => Ok(BaselineMode::EventBins),
            _ => Err(Error::invalid(format!("unknown baseline mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineOptions {
    pub folds: usize,
    /// Components kept for raw frames and the prefix curve.
    pub pca_components: usize,
    pub linear: LinearConfig,
    /// Encoding threshold for the event modes.
    pub threshold: f64,
    pub time_bin_size_ms: f64,
    pub seed: u64,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        BaselineOptions {
            folds: 5,
            pca_components: 12,
            linear: LinearConfig::default(),
            threshold: 1.0,
            time_bin_size_ms: 5.0,
            seed: 0,
        }
    }
}

pub fn build_features(dataset: &[FrameSequence], mode: BaselineMode, opts: &BaselineOptions) -> Result<FeatureMatrix> {
    let labels = dataset.iter().map(|s| s.label()).collect();
    let enc = EncoderConfig::new(opts.threshold);
    let bin = BinningConfig::new(opts.time_bin_size_ms);
    let rows: Vec<Vec<f64>> = dataset
        .par_iter()
        .map(|s| -> Result<Vec<f64>> {
            Ok(match mode {
                BaselineMode::Raw => raw_features(s),
                BaselineMode::Collapsed => time_collapse(s),
                BaselineMode::Events => event_count_features(&encode(s, &enc)?),
                BaselineMode::EventBins => event_bin_features(&bin_events(&encode(s, &enc)?, &bin)?),
            })
        })
        .collect::<Result<_>>()?;
    FeatureMatrix::from_rows(rows, labels)
}

/// Cross-validated accuracy of one feature mode.
pub fn run_baseline(dataset: &[FrameSequence], mode: BaselineMode, opts: &BaselineOptions) -> Result<CvResult> {
    let f = build_features(dataset, mode, opts)?;
    let pca = match mode {
        BaselineMode::Raw => Some(opts.pca_components.min(f.x.ncols())),
        _ => None,
    };
    cross_validate(&f.x, &f.labels, opts.folds, pca, &opts.linear, opts.seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n_frames: usize,
    pub time_s: f64,
    pub mean: f64,
    pub std: f64,
}

/// Accuracy when only the first `n` frames are used, for
/// `n = step, 2·step, …` and always the full length. Each prefix is reduced
/// to at most `pca_components` dimensions.
pub fn incremental_frames_curve(dataset: &[FrameSequence], opts: &BaselineOptions, step: usize) -> Result<Vec<CurvePoint>> {
    let first = dataset.first().ok_or_else(|| Error::invalid("empty dataset"))?;
    let n_frames = first.n_frames();
    let fs = first.sampling_rate_hz();
    let step = step.max(1);
    let mut lengths: Vec<usize> = (step..=n_frames).step_by(step).collect();
    if lengths.last() != Some(&n_frames) {
        lengths.push(n_frames);
    }
    let labels: Vec<usize> = dataset.iter().map(|s| s.label()).collect();
    let mut out = Vec::with_capacity(lengths.len());
    for n in lengths {
        let rows = dataset.iter().map(|s| raw_features(&s.prefix(n))).collect();
        let f = FeatureMatrix::from_rows(rows, labels.clone())?;
        let k = opts.pca_components.min(f.x.ncols());
        let cv = cross_validate(&f.x, &f.labels, opts.folds, Some(k), &opts.linear, opts.seed)?;
        out.push(CurvePoint {
            n_frames: n,
            time_s: n as f64 / fs,
            mean: cv.mean,
            std: cv.std,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn collapse_examples() {
        let s = FrameSequence::new(array![[7.0, 7.0, 7.0], [0.0, 2.0, 4.0]], 40.0, 0).unwrap();
        assert_eq!(time_collapse(&s), vec![7.0, 2.0]);
        let shuffled = FrameSequence::new(array![[7.0, 7.0, 7.0], [4.0, 0.0, 2.0]], 40.0, 0).unwrap();
        assert_eq!(time_collapse(&shuffled), time_collapse(&s));
        assert_eq!(raw_features(&s), vec![7.0, 0.0, 7.0, 2.0, 7.0, 4.0]);
    }

    #[test]
    fn event_counts_have_two_channels_per_taxel() {
        let s = FrameSequence::new(array![[0.0, 3.0, 0.0], [0.0, 0.0, 0.0]], 40.0, 0).unwrap();
        let f = event_count_features(&encode(&s, &EncoderConfig::new(1.0)).unwrap());
        assert_eq!(f, vec![3.0, 3.0, 0.0, 0.0]);
    }

    #[test]
    fn modes_parse() {
        assert_eq!("raw".parse::<BaselineMode>().unwrap(), BaselineMode::Raw);
        assert_eq!("event-bins".parse::<BaselineMode>().unwrap(), BaselineMode::EventBins);
        assert!("svm".parse::<BaselineMode>().is_err());
    }
}
