//! Train the recurrent network on synthetic Braille recordings at ϑ = 2 with
//! the optimized settings for that threshold.
//!
//! `cargo run --release --example train_synthetic -- [classes] [reps] [epochs]`

use tactile_snn::harness::{prepare_for, synth_dataset};
use tactile_snn::train::{train, TrainConfig};

fn main() -> tactile_snn::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let classes = args.first().copied().unwrap_or(10);
    let reps = args.get(1).copied().unwrap_or(50);
    let epochs = args.get(2).copied().unwrap_or(100);

    let data = synth_dataset(classes, reps, 0)?;
    let mut cfg = TrainConfig::preset(2.0).expect("preset");
    cfg.epochs = epochs;
    cfg.target_accuracy = Some(0.95);
    let inputs = prepare_for(&data.samples, &cfg)?;
    println!(
        "{} samples, {} steps × {} inputs",
        inputs.len(),
        inputs[0].n_steps(),
        inputs[0].n_channels()
    );
    let start = std::time::Instant::now();
    let out = train(&inputs, classes, &cfg)?;
    println!(
        "best test accuracy {:.3} at epoch {} ({:.1} s)",
        out.best_test_acc,
        out.best_epoch,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
