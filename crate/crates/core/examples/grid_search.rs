//! Grid over time-bin size and number of input copies at one encoding
//! threshold, with a reduced network so it finishes in minutes.

use tactile_snn::harness::{prepare_for, synth_dataset};
use tactile_snn::train::{grid_search, GridSpace, TrainConfig};

fn main() -> tactile_snn::Result<()> {
    let data = synth_dataset(5, 20, 0)?;
    let base = TrainConfig {
        hidden_size: 64,
        epochs: 15,
        batch_size: 16,
        learning_rate: 0.005,
        ..TrainConfig::preset(2.0).expect("preset")
    };
    let space = GridSpace {
        time_bin_sizes: vec![3.0, 10.0],
        nb_input_copies: vec![1, 4],
    };
    let result = grid_search(&space, &base, data.n_classes(), |bin, copies| {
        let cfg = TrainConfig {
            time_bin_size: bin,
            nb_input_copies: copies,
            ..base.clone()
        };
        prepare_for(&data.samples, &cfg)
    })?;
    for r in &result.rows {
        println!(
            "bin {:>4} ms, {} copies: test accuracy {:.3} (epoch {}){}",
            r.time_bin_size,
            r.nb_input_copies,
            r.test_acc,
            r.best_epoch,
            if r.preset_optimum { "  <- optimized setting" } else { "" }
        );
    }
    result.write_csv(std::io::stdout())?;
    Ok(())
}
