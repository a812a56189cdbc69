//! Current-based leaky integrate-and-fire dynamics: a single neuron under a
//! constant drive, then a small recurrent network on a spike raster.

use ndarray::array;
use tactile_snn::event_codec::BinnedSpikeTensor;
use tactile_snn::snn::{forward, infer, LayerState, LifParams, NetworkDef};

fn main() -> tactile_snn::Result<()> {
    let p = LifParams::from_ratio(50.0, 10.0, 1.0)?;
    println!("α = {:.4}, β = {:.4}", p.alpha, p.beta);
    let mut s = LayerState::zeros(1);
    let mut raster = String::new();
    for _ in 0..60 {
        s.step(&p, &[0.05])?;
        raster.push(if s.spikes[0] > 0.0 { '|' } else { '.' });
    }
    println!("constant drive 0.05: {raster}");

    let lif = LifParams::from_decays(0.8, 0.9, 1.0)?;
    let net = NetworkDef::new(
        array![[1.2, 0.0], [0.0, 0.9], [0.5, 0.5]],
        Some(array![[0.0, 0.3, 0.0], [0.0, 0.0, 0.3], [0.3, 0.0, 0.0]]),
        array![[1.5, 0.0, 0.2], [0.0, 1.5, 0.2]],
        lif,
        lif,
    )?;
    let mut x = BinnedSpikeTensor::zeros(30, 2, 1.0, 0);
    for t in (0..30).step_by(3) {
        x.set(t, 0);
    }
    let trace = forward(&net, &x)?;
    for (i, row) in trace.hidden.spikes.columns().into_iter().enumerate() {
        let line: String = row.iter().map(|&v| if v > 0.0 { '|' } else { '.' }).collect();
        println!("hidden {i}: {line}");
    }
    let summary = infer(&net, &x)?;
    println!("output counts {:?}", summary.output_counts);
    Ok(())
}
