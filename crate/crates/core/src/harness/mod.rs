//! Dataset ingestion, synthetic recordings and experiment orchestration.

pub mod dataset;
pub mod experiment;
pub mod pipeline;
pub mod synth;

pub use dataset::{load_dataset, sha256_hex, Dataset, DatasetFormat, Provenance};
pub use experiment::{
    load_experiment_data, run_experiment, test_split, write_outputs, DatasetSummary, ExperimentConfig,
    ExperimentResult, RunResult, Stat, ThresholdResult, SCHEMA_VERSION,
};
pub use pipeline::{compute_ttc, prefix_steps, prepare_for, prepare_inputs, TtcResult, TTC_PROBES, TTC_TOLERANCE};
pub use synth::{synth_dataset, synth_with, SynthConfig, BRAILLE, N_TAXELS};
