use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tactile_snn::baselines::{incremental_frames_curve, run_baseline, BaselineMode, BaselineOptions};
use tactile_snn::event_codec::{analyze_encoding, bin_events, encode, io as event_io, BinningConfig, EncoderConfig};
use tactile_snn::harness::{
    compute_ttc, load_dataset, prepare_for, run_experiment, synth_dataset, Dataset, DatasetFormat, ExperimentConfig,
    TTC_PROBES,
};
use tactile_snn::quant::{quantized_forward, QuantizedNetwork};
use tactile_snn::snn::NetworkDef;
use tactile_snn::train::{
    apply_overrides, evaluate, grid_search, parse_table, train, write_metrics_csv, GridSpace, TrainConfig,
};
use tactile_snn::Result;

#[derive(Parser)]
#[command(name = "tactile", version, about = "Event-based tactile classification with spiking networks")]
struct Cli {
    /// Seed for every random choice of the command.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Dataset file (`.csv` or binary); synthetic recordings when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Sampling rate of CSV datasets.
    #[arg(long, default_value_t = 40.0)]
    sampling_rate: f64,
    /// Expected SHA-256 of the dataset file.
    #[arg(long)]
    checksum: Option<String>,
    /// Classes of the synthetic fallback.
    #[arg(long, default_value_t = 10)]
    synth_classes: usize,
    /// Repetitions per class of the synthetic fallback.
    #[arg(long, default_value_t = 50)]
    synth_reps: usize,
}

#[derive(Args, Clone)]
struct ModelInputArgs {
    /// Encoding threshold the model was trained at.
    #[arg(long, default_value_t = 2.0)]
    threshold: f64,
    /// Bin size in ms; defaults to the optimized value for the threshold.
    #[arg(long)]
    bin_size: Option<f64>,
    /// Input copies; defaults to the optimized value for the threshold.
    #[arg(long)]
    copies: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Encode every sample into an event file.
    Encode {
        #[arg(long, default_value_t = 1.0)]
        threshold: f64,
        /// Also report how many events survive binning at this size (ms).
        #[arg(long)]
        bin_size: Option<f64>,
        #[command(flatten)]
        data: DataArgs,
        /// Output directory; `.txt` events unless `--binary`.
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        binary: bool,
    },
    /// Encoding statistics per threshold and bin size.
    Analyze {
        #[arg(long, value_delimiter = ',', default_value = "1,2,5,10")]
        thresholds: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,3,5,10")]
        bin_sizes: Vec<f64>,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        report: PathBuf,
    },
    /// Train a spiking network.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Flat TOML training config; the threshold's preset otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 2.0)]
        threshold: f64,
        #[arg(long)]
        epochs: Option<usize>,
        /// Train without recurrent weights.
        #[arg(long)]
        feedforward: bool,
        /// Extra output neuron beyond the dataset classes.
        #[arg(long)]
        extra_class: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Train over a grid of bin sizes and input copies.
    Gridsearch {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 2.0)]
        threshold: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,3,5,10")]
        bin_sizes: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        copies: Vec<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Convert a float model to fixed point.
    Quantize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fixed-point inference with synaptic-operation accounting.
    Qinfer {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        inputs: ModelInputArgs,
        #[arg(long)]
        report: PathBuf,
    },
    /// Linear one-vs-rest baselines.
    Baseline {
        /// raw, collapsed, events, event-bins or curve.
        #[arg(long, default_value = "raw")]
        mode: String,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 12)]
        components: usize,
        /// Frames added per point of the curve.
        #[arg(long, default_value_t = 1)]
        step: usize,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        report: PathBuf,
    },
    /// Accuracy versus the fraction of the input window seen.
    Ttc {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        inputs: ModelInputArgs,
        #[arg(long)]
        report: PathBuf,
    },
    /// Full pipeline from a config file.
    Experiment {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Check the config and exit.
        #[arg(long)]
        dry_run: bool,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Write a synthetic dataset.
    Synth {
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 50)]
        reps: usize,
        /// `.csv` or binary.
        #[arg(long)]
        output: PathBuf,
    },
}

fn load_data(a: &DataArgs, seed: u64) -> Result<Dataset> {
    match &a.input {
        Some(p) => load_dataset(p, DatasetFormat::from_path(p), a.sampling_rate, a.checksum.as_deref()),
        None => {
            log::info!("no --input given; using {}×{} synthetic recordings", a.synth_classes, a.synth_reps);
            synth_dataset(a.synth_classes, a.synth_reps, seed)
        }
    }
}

fn train_config(path: Option<&Path>, threshold: f64, seed: Option<u64>, epochs: Option<usize>) -> Result<TrainConfig> {
    let mut table = match path {
        Some(p) => parse_table(&std::fs::read_to_string(p)?)?,
        None => toml::Table::new(),
    };
    if !table.contains_key("threshold") {
        table.insert("threshold".into(), toml::Value::Float(threshold));
    }
    let theta = table.get("threshold").and_then(toml::Value::as_float).unwrap_or(threshold);
    let mut base = toml::Table::try_from(TrainConfig::preset(theta).unwrap_or_default()).expect("serializable");
    base.extend(table);
    apply_overrides(&mut base, TrainConfig::KEYS, std::env::vars());
    if let Some(s) = seed {
        base.insert("seed".into(), toml::Value::Integer(s as i64));
    }
    if let Some(e) = epochs {
        base.insert("epochs".into(), toml::Value::Integer(e as i64));
    }
    TrainConfig::from_table(&base)
}

fn model_inputs(a: &ModelInputArgs) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::preset(a.threshold).unwrap_or_default();
    cfg.threshold = a.threshold;
    if let Some(b) = a.bin_size {
        cfg.time_bin_size = b;
    }
    if let Some(c) = a.copies {
        cfg.nb_input_copies = c;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    match cli.cmd {
        Cmd::Encode {
            threshold,
            bin_size,
            data,
            output,
            binary,
        } => {
            let d = load_data(&data, seed)?;
            std::fs::create_dir_all(&output)?;
            let enc = EncoderConfig::new(threshold);
            let (mut events, mut kept) = (0, 0);
            for (i, s) in d.samples.iter().enumerate() {
                let stream = encode(s, &enc)?;
                events += stream.len();
                if let Some(b) = bin_size {
                    kept += bin_events(&stream, &BinningConfig::new(b))?.total_spikes();
                }
                if binary {
                    std::fs::write(output.join(format!("{i:05}.tev")), event_io::to_binary(&stream))?;
                } else {
                    std::fs::write(output.join(format!("{i:05}.txt")), event_io::to_text(&stream))?;
                }
            }
            let n = d.len().max(1) as f64;
            println!("{} samples, {:.2} events per sample", d.len(), events as f64 / n);
            if let Some(b) = bin_size {
                println!("{:.2} per sample after {b} ms binning", kept as f64 / n);
            }
        }
        Cmd::Analyze {
            thresholds,
            bin_sizes,
            data,
            report,
        } => {
            let d = load_data(&data, seed)?;
            let r = analyze_encoding(&d.samples, &thresholds, &bin_sizes, EncoderConfig::new(1.0).interpolation_resolution)?;
            for e in &r {
                println!(
                    "ϑ={:<4} bin={:<4} events={:>7.2} γ={:>6.2} ε={:.4} binned={:>7.2} lost={:.2}% isi<1ms={:.2}%",
                    e.threshold,
                    e.time_bin_size_ms,
                    e.mean_events_per_sample,
                    e.compression_ratio,
                    e.reconstruction_mse,
                    e.mean_events_after_binning,
                    100.0 * e.events_lost_fraction,
                    100.0 * e.isi_below_1ms_fraction
                );
            }
            write_json(&report, &r)?;
        }
        Cmd::Train {
            data,
            config,
            threshold,
            epochs,
            feedforward,
            extra_class,
            out,
            metrics,
        } => {
            let d = load_data(&data, seed)?;
            let mut cfg = train_config(config.as_deref(), threshold, cli.seed, epochs)?;
            if feedforward {
                cfg.recurrent = false;
            }
            let inputs = prepare_for(&d.samples, &cfg)?;
            let o = train(&inputs, d.n_classes() + extra_class as usize, &cfg)?;
            o.net.save(&out)?;
            if let Some(m) = metrics {
                write_metrics_csv(&o.metrics, std::fs::File::create(m)?)?;
            }
            println!("best test accuracy {:.4} at epoch {}", o.best_test_acc, o.best_epoch);
        }
        Cmd::Gridsearch {
            data,
            config,
            threshold,
            bin_sizes,
            copies,
            epochs,
            report,
        } => {
            let d = load_data(&data, seed)?;
            let base = train_config(config.as_deref(), threshold, cli.seed, epochs)?;
            let space = GridSpace {
                time_bin_sizes: bin_sizes,
                nb_input_copies: copies,
            };
            let r = grid_search(&space, &base, d.n_classes(), |bin, c| {
                let cfg = TrainConfig {
                    time_bin_size: bin,
                    nb_input_copies: c,
                    ..base.clone()
                };
                prepare_for(&d.samples, &cfg)
            })?;
            r.write_csv(std::fs::File::create(report)?)?;
            let b = r.best_row();
            println!("best: bin {} ms, {} copies, accuracy {:.4}", b.time_bin_size, b.nb_input_copies, b.test_acc);
        }
        Cmd::Quantize { model, out } => {
            let net = NetworkDef::load(&model)?;
            let q = QuantizedNetwork::from_float(&net)?;
            q.save(&out)?;
            println!(
                "w_scale {} threshold {} hidden δ ({}, {})",
                q.hidden.w_scale, q.hidden.threshold, q.hidden.delta_current, q.hidden.delta_voltage
            );
        }
        Cmd::Qinfer {
            model,
            data,
            inputs,
            report,
        } => {
            let d = load_data(&data, seed)?;
            let q = QuantizedNetwork::load(&model)?;
            let x = prepare_for(&d.samples, &model_inputs(&inputs)?)?;
            let out = quantized_forward(&q, &x)?;
            let acc = out.accuracy(&d.labels());
            println!(
                "accuracy {:.4}, {:.1} synops per sample",
                acc,
                out.report.synops_per_sample()
            );
            write_json(
                &report,
                &serde_json::json!({ "accuracy": acc, "synops": out.report, "predictions": out.predictions }),
            )?;
        }
        Cmd::Baseline {
            mode,
            folds,
            components,
            step,
            data,
            report,
        } => {
            let d = load_data(&data, seed)?;
            let opts = BaselineOptions {
                folds,
                pca_components: components,
                seed,
                ..BaselineOptions::default()
            };
            let mut w = csv::Writer::from_path(&report)?;
            if mode == "curve" {
                w.write_record(["n_frames", "time_s", "mean", "std"])?;
                for p in incremental_frames_curve(&d.samples, &opts, step)? {
                    w.write_record([p.n_frames.to_string(), p.time_s.to_string(), p.mean.to_string(), p.std.to_string()])?;
                }
            } else {
                let m: BaselineMode = mode.parse()?;
                let cv = run_baseline(&d.samples, m, &opts)?;
                println!("{mode}: {:.4} ± {:.4}", cv.mean, cv.std);
                w.write_record(["mode", "fold", "accuracy"])?;
                for (i, a) in cv.fold_accuracies.iter().enumerate() {
                    w.write_record([mode.clone(), i.to_string(), a.to_string()])?;
                }
            }
            w.flush()?;
        }
        Cmd::Ttc {
            model,
            data,
            inputs,
            report,
        } => {
            let d = load_data(&data, seed)?;
            let net = NetworkDef::load(&model)?;
            let x = prepare_for(&d.samples, &model_inputs(&inputs)?)?;
            let refs: Vec<_> = x.iter().collect();
            println!("full-window accuracy {:.4}", evaluate(&net, &refs)?);
            let r = compute_ttc(&net, &refs, TTC_PROBES)?;
            let mut w = csv::Writer::from_path(&report)?;
            w.write_record(["fraction", "accuracy"])?;
            for (p, a) in r.fractions.iter().zip(&r.accuracies) {
                w.write_record([p.to_string(), a.to_string()])?;
            }
            w.flush()?;
            println!("TTC {:.2}", r.ttc);
        }
        Cmd::Experiment {
            config,
            dry_run,
            out_dir,
        } => {
            let mut table = match &config {
                Some(p) => parse_table(&std::fs::read_to_string(p)?)?,
                None => toml::Table::new(),
            };
            let keys: Vec<&str> = ExperimentConfig::KEYS.iter().chain(TrainConfig::KEYS).copied().collect();
            apply_overrides(&mut table, &keys, std::env::vars());
            if let Some(s) = cli.seed {
                table.insert("seeds".into(), toml::Value::Array(vec![toml::Value::Integer(s as i64)]));
            }
            if let Some(o) = out_dir {
                table.insert("out_dir".into(), toml::Value::String(o.display().to_string()));
            }
            let cfg = ExperimentConfig::from_table(table)?;
            match run_experiment(&cfg, dry_run)? {
                None => println!("config ok"),
                Some(r) => {
                    for t in &r.thresholds {
                        println!(
                            "ϑ={}: accuracy {:.4} ± {:.4}",
                            t.threshold, t.accuracy.mean, t.accuracy.std
                        );
                    }
                    println!("report written to {}", cfg.out_dir.join("report.json").display());
                }
            }
        }
        Cmd::Synth { classes, reps, output } => {
            let d = synth_dataset(classes, reps, seed)?;
            d.save(&output, DatasetFormat::from_path(&output))?;
            println!("{} samples written to {}", d.len(), output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
