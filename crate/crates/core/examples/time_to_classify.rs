//! Accuracy on growing prefixes of the input window and the smallest
//! prefix that matches full-window accuracy.

use tactile_snn::harness::{compute_ttc, prepare_for, synth_dataset, test_split, TTC_PROBES};
use tactile_snn::train::{train, TrainConfig};

fn main() -> tactile_snn::Result<()> {
    let data = synth_dataset(5, 20, 2)?;
    let cfg = TrainConfig {
        hidden_size: 64,
        epochs: 25,
        batch_size: 16,
        learning_rate: 0.005,
        ..TrainConfig::preset(2.0).expect("preset")
    };
    let inputs = prepare_for(&data.samples, &cfg)?;
    let out = train(&inputs, data.n_classes(), &cfg)?;
    let test: Vec<_> = test_split(&inputs, &cfg).into_iter().map(|i| &inputs[i]).collect();
    let r = compute_ttc(&out.net, &test, TTC_PROBES)?;
    let window = data.samples[0].duration_s();
    for (p, a) in r.fractions.iter().zip(&r.accuracies) {
        println!("{:>4.0}% ({:.3} s): {:.3}", 100.0 * p, p * window, a);
    }
    println!("TTC = {:.2} of the window", r.ttc);
    Ok(())
}
