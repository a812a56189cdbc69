//! The whole pipeline from a config: encoding analysis, training over two
//! seeds, fixed-point evaluation and time to classify, with reports written
//! to a directory.
//!
//! `cargo run --release --example experiment -- [out_dir]`

use tactile_snn::harness::{run_experiment, ExperimentConfig};

const CONFIG: &str = r#"
synth_classes = 4
synth_repetitions = 15
thresholds = [2.0]
seeds = [0, 1]
analysis_bin_sizes = [3.0, 5.0]
hidden_size = 48
epochs = 12
batch_size = 16
learning_rate = 0.005
"#;

fn main() -> tactile_snn::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "experiment_out".into());
    let mut cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    cfg.out_dir = out.into();
    run_experiment(&cfg, true)?;
    let r = run_experiment(&cfg, false)?.expect("not a dry run");
    for t in &r.thresholds {
        println!(
            "ϑ = {}: accuracy {:.3} ± {:.3}, fixed point {:.3}, TTC {:.2}",
            t.threshold,
            t.accuracy.mean,
            t.accuracy.std,
            t.quantized_accuracy.map_or(f64::NAN, |s| s.mean),
            t.ttc.map_or(f64::NAN, |s| s.mean)
        );
    }
    println!("reports in {}", cfg.out_dir.display());
    Ok(())
}
