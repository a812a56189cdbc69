//! End-to-end runs: load or synthesize data, analyze the encoding, then per
//! threshold and seed train, quantize and evaluate.
//!
//! Config files are flat TOML. Experiment keys:
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `data` | unset | dataset path; unset means synthetic data |
//! | `data_checksum` | unset | expected SHA-256 of `data` |
//! | `sampling_rate_hz` | 40 | sampling rate for CSV datasets |
//! | `synth_classes`, `synth_repetitions`, `synth_seed` | 10, 50, 0 | synthetic data shape |
//! | `thresholds` | `[2.0]` | encoding thresholds to train at |
//! | `analysis_bin_sizes` | `[1, 3, 5, 10]` | bin sizes of the encoding table |
//! | `interpolation_resolution` | 1000 | encoder sub-frame resolution |
//! | `seeds` | `[0]` | one training run per seed |
//! | `extra_class` | false | add one output neuron beyond the dataset classes |
//! | `use_presets` | true | start from the optimized settings of each threshold |
//! | `quantize`, `ttc` | true, true | run the fixed-point and time-to-classify stages |
//! | `out_dir` | `results` | output directory |
//! | `resume` | false | reuse trained models found in `out_dir/models` |
//!
//! Every training key (`scale`, `time_bin_size`, `tau_mem`, ...) may appear
//! too and overrides the preset for all thresholds. `TACTILE_<KEY>`
//! environment variables override file values.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{load_dataset, sha256_hex, Dataset, DatasetFormat};
use super::pipeline::{compute_ttc, prepare_for, TtcResult, TTC_PROBES};
use super::synth::synth_dataset;
use crate::error::{Error, Result};
use crate::event_codec::{analyze_encoding, BinnedSpikeTensor, EncodingReport};
use crate::quant::{float_synops, quantized_forward, QuantizedNetwork, SynOpReport};
use crate::snn::NetworkDef;
use crate::train::{
    apply_overrides, evaluate, parse_table, reject_unknown, rng_from_seed, stratified_split, train, write_metrics_csv,
    TrainConfig,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: Option<PathBuf>,
    pub data_checksum: Option<String>,
    pub sampling_rate_hz: f64,
    pub synth_classes: usize,
    pub synth_repetitions: usize,
    pub synth_seed: u64,
    pub thresholds: Vec<f64>,
    pub analysis_bin_sizes: Vec<f64>,
    pub interpolation_resolution: u32,
    pub seeds: Vec<u64>,
    pub extra_class: bool,
    pub use_presets: bool,
    pub quantize: bool,
    pub ttc: bool,
    pub out_dir: PathBuf,
    pub resume: bool,
    /// Training keys applied on top of the per-threshold preset.
    pub train: toml::Table,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: None,
            data_checksum: None,
            sampling_rate_hz: 40.0,
            synth_classes: 10,
            synth_repetitions: 50,
            synth_seed: 0,
            thresholds: vec![2.0],
            analysis_bin_sizes: vec![1.0, 3.0, 5.0, 10.0],
            interpolation_resolution: 1000,
            seeds: vec![0],
            extra_class: false,
            use_presets: true,
            quantize: true,
            ttc: true,
            out_dir: PathBuf::from("results"),
            resume: false,
            train: toml::Table::new(),
        }
    }
}

impl ExperimentConfig {
    pub const KEYS: &'static [&'static str] = &[
        "data",
        "data_checksum",
        "sampling_rate_hz",
        "synth_classes",
        "synth_repetitions",
        "synth_seed",
        "thresholds",
        "analysis_bin_sizes",
        "interpolation_resolution",
        "seeds",
        "extra_class",
        "use_presets",
        "quantize",
        "ttc",
        "out_dir",
        "resume",
    ];

    fn all_keys() -> Vec<&'static str> {
        Self::KEYS.iter().chain(TrainConfig::KEYS).copied().collect()
    }

    pub fn from_table(mut table: toml::Table) -> Result<Self> {
        reject_unknown(&table, &Self::all_keys())?;
        let train: toml::Table = TrainConfig::KEYS
            .iter()
            .filter_map(|k| table.remove(*k).map(|v| (k.to_string(), v)))
            .collect();
        let mut cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.train = train;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_table(parse_table(text)?)
    }

    /// Read a config file and apply `TACTILE_*` environment overrides.
    pub fn load(path: &Path) -> Result<Self> {
        let mut table = parse_table(&std::fs::read_to_string(path)?)?;
        apply_overrides(&mut table, &Self::all_keys(), std::env::vars());
        Self::from_table(table)
    }

    pub fn to_toml_string(&self) -> String {
        let mut v = toml::Table::try_from(self).expect("config serializes");
        v.remove("train");
        v.extend(self.train.clone());
        toml::to_string(&v).expect("flat config serializes")
    }

    /// Training settings for one threshold and seed.
    pub fn train_config(&self, threshold: f64, seed: u64) -> Result<TrainConfig> {
        let base = match TrainConfig::preset(threshold) {
            Some(preset) if self.use_presets => preset,
            _ => TrainConfig::default(),
        };
        let mut table = toml::Table::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
        table.extend(self.train.clone());
        table.insert("threshold".into(), toml::Value::Float(threshold));
        table.insert("seed".into(), toml::Value::Integer(seed as i64));
        TrainConfig::from_table(&table)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.thresholds.is_empty() || self.thresholds.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return bad("thresholds must be a non-empty list of positive numbers");
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty");
        }
        if self.analysis_bin_sizes.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return bad("analysis_bin_sizes must be positive");
        }
        if self.data.is_none() && (self.synth_classes < 2 || self.synth_repetitions < 2) {
            return bad("synthetic data needs at least two classes and two repetitions");
        }
        if !(self.sampling_rate_hz.is_finite() && self.sampling_rate_hz > 0.0) {
            return bad("sampling_rate_hz must be positive");
        }
        if self.interpolation_resolution == 0 {
            return bad("interpolation_resolution must be positive");
        }
        for &t in &self.thresholds {
            for &s in &self.seeds {
                self.train_config(t, s)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len().max(1) as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Stat { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub test_accuracy: f64,
    pub quantized_accuracy: Option<f64>,
    pub float_synops: SynOpReport,
    pub quantized_synops: Option<SynOpReport>,
    pub ttc: Option<TtcResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub threshold: f64,
    pub time_bin_size: f64,
    pub nb_input_copies: usize,
    pub accuracy: Stat,
    pub quantized_accuracy: Option<Stat>,
    pub ttc: Option<Stat>,
    pub runs: Vec<RunResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub source: Option<String>,
    pub checksum: String,
    pub n_samples: usize,
    pub n_classes: usize,
    pub n_outputs: usize,
    /// Recording length of the first sample, seconds.
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema_version: u32,
    /// The effective config as flat TOML.
    pub config: String,
    pub dataset: DatasetSummary,
    pub encoding: Vec<EncodingReport>,
    pub thresholds: Vec<ThresholdResult>,
}

/// Load the configured dataset, or synthesize one.
pub fn load_experiment_data(cfg: &ExperimentConfig) -> Result<Dataset> {
    match &cfg.data {
        Some(p) => load_dataset(p, DatasetFormat::from_path(p), cfg.sampling_rate_hz, cfg.data_checksum.as_deref()),
        None => {
            let mut d = synth_dataset(cfg.synth_classes, cfg.synth_repetitions, cfg.synth_seed)?;
            d.provenance.checksum = Some(sha256_hex(&d.to_binary()?));
            Ok(d)
        }
    }
}

/// The test split `train` draws for this config.
pub fn test_split(samples: &[BinnedSpikeTensor], cfg: &TrainConfig) -> Vec<usize> {
    let labels: Vec<usize> = samples.iter().map(|s| s.label()).collect();
    stratified_split(&labels, cfg.test_fraction, &mut rng_from_seed(cfg.seed)).1
}

fn model_path(dir: &Path, threshold: f64, seed: u64) -> PathBuf {
    dir.join("models").join(format!("rsnn_t{threshold}_s{seed}.tnc"))
}

fn run_one(
    cfg: &ExperimentConfig,
    tcfg: &TrainConfig,
    inputs: &[BinnedSpikeTensor],
    n_outputs: usize,
) -> Result<RunResult> {
    let path = model_path(&cfg.out_dir, tcfg.threshold, tcfg.seed);
    let net = if cfg.resume && path.exists() {
        NetworkDef::load(&path).map_err(|e| e.in_stage("load model"))?
    } else {
        let outcome = train(inputs, n_outputs, tcfg).map_err(|e| e.in_stage("train"))?;
        outcome.net.save(&path).map_err(|e| e.in_stage("train"))?;
        let csv = std::fs::File::create(path.with_extension("metrics.csv"))?;
        write_metrics_csv(&outcome.metrics, csv)?;
        outcome.net
    };
    let test_idx = test_split(inputs, tcfg);
    let test: Vec<&BinnedSpikeTensor> = test_idx.iter().map(|&i| &inputs[i]).collect();
    let test_owned: Vec<BinnedSpikeTensor> = test.iter().map(|t| (*t).clone()).collect();
    let labels: Vec<usize> = test.iter().map(|t| t.label()).collect();
    let test_accuracy = evaluate(&net, &test).map_err(|e| e.in_stage("evaluate"))?;
    let float_synops = float_synops(&net, &test_owned).map_err(|e| e.in_stage("evaluate"))?;

    let (quantized_accuracy, quantized_synops) = if cfg.quantize {
        let q = QuantizedNetwork::from_float(&net).map_err(|e| e.in_stage("quantize"))?;
        q.save(&path.with_extension("q.tnc")).map_err(|e| e.in_stage("quantize"))?;
        let out = quantized_forward(&q, &test_owned).map_err(|e| e.in_stage("quantized inference"))?;
        (Some(out.accuracy(&labels)), Some(out.report))
    } else {
        (None, None)
    };
    let ttc = if cfg.ttc {
        Some(compute_ttc(&net, &test, TTC_PROBES).map_err(|e| e.in_stage("ttc"))?)
    } else {
        None
    };
    Ok(RunResult {
        seed: tcfg.seed,
        test_accuracy,
        quantized_accuracy,
        float_synops,
        quantized_synops,
        ttc,
    })
}

/// Execute the configured pipeline and write `report.json`, `summary.csv`,
/// `encoding.csv` and `ttc.csv` into `out_dir`, plus models and per-run
/// training curves under `out_dir/models`. With `dry_run`, only the config is
/// checked and `None` is returned.
pub fn run_experiment(cfg: &ExperimentConfig, dry_run: bool) -> Result<Option<ExperimentResult>> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    if dry_run {
        return Ok(None);
    }
    std::fs::create_dir_all(cfg.out_dir.join("models")).map_err(|e| Error::from(e).in_stage("output"))?;

    let dataset = load_experiment_data(cfg).map_err(|e| e.in_stage("load"))?;
    if dataset.is_empty() {
        return Err(Error::invalid("dataset is empty").in_stage("load"));
    }
    let n_outputs = dataset.n_classes() + cfg.extra_class as usize;

    let mut analysis_thresholds = cfg.thresholds.clone();
    analysis_thresholds.push(1.0);
    analysis_thresholds.sort_by(f64::total_cmp);
    analysis_thresholds.dedup();
    let encoding = if cfg.analysis_bin_sizes.is_empty() {
        Vec::new()
    } else {
        analyze_encoding(
            &dataset.samples,
            &analysis_thresholds,
            &cfg.analysis_bin_sizes,
            cfg.interpolation_resolution,
        )
        .map_err(|e| e.in_stage("analyze"))?
    };

    let mut thresholds = Vec::new();
    for &theta in &cfg.thresholds {
        let base = cfg.train_config(theta, cfg.seeds[0])?;
        let inputs = prepare_for(&dataset.samples, &base).map_err(|e| e.in_stage("encode"))?;
        let runs = cfg
            .seeds
            .par_iter()
            .map(|&seed| run_one(cfg, &cfg.train_config(theta, seed)?, &inputs, n_outputs))
            .collect::<Result<Vec<_>>>()?;
        let acc: Vec<f64> = runs.iter().map(|r| r.test_accuracy).collect();
        let q: Option<Vec<f64>> = runs.iter().map(|r| r.quantized_accuracy).collect();
        let t: Option<Vec<f64>> = runs.iter().map(|r| r.ttc.as_ref().map(|x| x.ttc)).collect();
        thresholds.push(ThresholdResult {
            threshold: theta,
            time_bin_size: base.time_bin_size,
            nb_input_copies: base.nb_input_copies,
            accuracy: Stat::of(&acc),
            quantized_accuracy: q.map(|q| Stat::of(&q)),
            ttc: t.map(|t| Stat::of(&t)),
            runs,
        });
    }

    let result = ExperimentResult {
        schema_version: SCHEMA_VERSION,
        config: cfg.to_toml_string(),
        dataset: DatasetSummary {
            source: dataset.provenance.source.clone(),
            checksum: dataset.provenance.checksum.clone().unwrap_or_default(),
            n_samples: dataset.len(),
            n_classes: dataset.n_classes(),
            n_outputs,
            duration_s: dataset.samples[0].duration_s(),
        },
        encoding,
        thresholds,
    };
    write_outputs(&cfg.out_dir, &result).map_err(|e| e.in_stage("report"))?;
    Ok(Some(result))
}

pub fn write_outputs(dir: &Path, r: &ExperimentResult) -> Result<()> {
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(r)? + "\n")?;

    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record([
        "threshold",
        "time_bin_size",
        "nb_input_copies",
        "accuracy_mean",
        "accuracy_std",
        "quantized_mean",
        "quantized_std",
        "ttc_mean",
        "synops_per_sample",
    ])?;
    let opt = |s: Option<f64>| s.map_or(String::new(), |v| v.to_string());
    for t in &r.thresholds {
        let synops = t.runs.iter().map(|x| x.float_synops.synops_per_sample()).sum::<f64>() / t.runs.len() as f64;
        w.write_record([
            t.threshold.to_string(),
            t.time_bin_size.to_string(),
            t.nb_input_copies.to_string(),
            t.accuracy.mean.to_string(),
            t.accuracy.std.to_string(),
            opt(t.quantized_accuracy.map(|s| s.mean)),
            opt(t.quantized_accuracy.map(|s| s.std)),
            opt(t.ttc.map(|s| s.mean)),
            synops.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("encoding.csv"))?;
    w.write_record([
        "threshold",
        "time_bin_size_ms",
        "events",
        "compression_ratio",
        "mse",
        "events_binned",
        "compression_ratio_binned",
        "mse_binned",
        "events_lost_fraction",
        "isi_below_1ms_fraction",
    ])?;
    for e in &r.encoding {
        w.write_record(
            [
                e.threshold,
                e.time_bin_size_ms,
                e.mean_events_per_sample,
                e.compression_ratio,
                e.reconstruction_mse,
                e.mean_events_after_binning,
                e.compression_ratio_after_binning,
                e.reconstruction_mse_after_binning,
                e.events_lost_fraction,
                e.isi_below_1ms_fraction,
            ]
            .map(|v| v.to_string()),
        )?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("ttc.csv"))?;
    w.write_record(["threshold", "seed", "fraction", "time_s", "accuracy"])?;
    for t in &r.thresholds {
        for run in &t.runs {
            let Some(ttc) = &run.ttc else { continue };
            for (p, a) in ttc.fractions.iter().zip(&ttc.accuracies) {
                w.write_record([
                    t.threshold.to_string(),
                    run.seed.to_string(),
                    p.to_string(),
                    (p * r.dataset.duration_s).to_string(),
                    a.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
