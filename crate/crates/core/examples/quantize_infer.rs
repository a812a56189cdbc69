//! Train small recurrent and feedforward networks, convert both to fixed
//! point and compare accuracy and synaptic operations.

use tactile_snn::harness::{prepare_for, synth_dataset, test_split};
use tactile_snn::quant::{float_synops, quantized_forward, QuantizedNetwork};
use tactile_snn::train::{evaluate, train, TrainConfig};

fn main() -> tactile_snn::Result<()> {
    let data = synth_dataset(5, 20, 1)?;
    for recurrent in [true, false] {
        let cfg = TrainConfig {
            hidden_size: 64,
            epochs: 30,
            batch_size: 16,
            learning_rate: 0.005,
            recurrent,
            target_accuracy: Some(1.0),
            ..TrainConfig::preset(2.0).expect("preset")
        };
        let inputs = prepare_for(&data.samples, &cfg)?;
        let out = train(&inputs, data.n_classes(), &cfg)?;
        let test: Vec<_> = test_split(&inputs, &cfg).into_iter().map(|i| inputs[i].clone()).collect();
        let labels: Vec<usize> = test.iter().map(|x| x.label()).collect();

        let q = QuantizedNetwork::from_float(&out.net)?;
        let qout = quantized_forward(&q, &test)?;
        let float_acc = evaluate(&out.net, &test.iter().collect::<Vec<_>>())?;
        let fs = float_synops(&out.net, &test)?;
        println!(
            "{}: float {:.3}, fixed point {:.3}; w_scale {} θ_q {} δ_I {} δ_V {}",
            if recurrent { "recurrent  " } else { "feedforward" },
            float_acc,
            qout.accuracy(&labels),
            q.hidden.w_scale,
            q.hidden.threshold,
            q.hidden.delta_current,
            q.hidden.delta_voltage
        );
        println!(
            "  synops/sample: float {:.0}, fixed point {:.0} (incl. blank steps)",
            fs.synops_per_sample(),
            qout.report.synops_per_sample()
        );
    }
    Ok(())
}
