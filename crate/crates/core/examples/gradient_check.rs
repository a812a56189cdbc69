//! Backpropagation through time against central finite differences.
//!
//! The reference replaces each binary spike with the fast sigmoid whose
//! derivative is the surrogate gradient, so both sides differentiate the
//! same function.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use tactile_snn::event_codec::BinnedSpikeTensor;
use tactile_snn::snn::{forward_with, LifParams, NetworkDef, SpikeFn};
use tactile_snn::train::{backward, loss_breakdown, RegParams};

fn loss(net: &NetworkDef, xs: &[BinnedSpikeTensor], scale: f64, reg: &RegParams) -> f64 {
    let tr: Vec<_> = xs.iter().map(|x| forward_with(net, x, SpikeFn::FastSigmoid { scale }).unwrap()).collect();
    let oc: Vec<_> = tr.iter().map(|t| t.output_counts.clone()).collect();
    let hc: Vec<_> = tr.iter().map(|t| t.hidden_counts.clone()).collect();
    let labels: Vec<_> = xs.iter().map(|x| x.label()).collect();
    loss_breakdown(&oc, &hc, &labels, xs[0].n_steps(), reg).unwrap().total
}

fn main() -> tactile_snn::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let mut m = |r, c| Array2::from_shape_fn((r, c), |_| rng.random_range(-1.5..1.5));
    let net = NetworkDef::new(
        m(3, 2),
        Some(m(3, 3)),
        m(2, 3),
        LifParams::from_decays(0.6, 0.85, 1.0)?,
        LifParams::from_decays(0.5, 0.8, 1.0)?,
    )?;
    let mut xs = vec![BinnedSpikeTensor::zeros(5, 2, 1.0, 0), BinnedSpikeTensor::zeros(5, 2, 1.0, 1)];
    for (i, x) in xs.iter_mut().enumerate() {
        for t in 0..5 {
            x.set(t, (t + i) % 2);
        }
    }
    let reg = RegParams {
        reg_neurons: 0.2,
        reg_spikes: 0.3,
        lower_threshold: 0.05,
        upper_threshold: 0.1,
        ..RegParams::default()
    };
    let scale = 2.0;

    let traces: Vec<_> = xs.iter().map(|x| forward_with(&net, x, SpikeFn::FastSigmoid { scale })).collect::<Result<_, _>>()?;
    let batch: Vec<_> = xs.iter().zip(&traces).collect();
    let (g, l) = backward(&net, &batch, scale, &reg)?;
    println!("loss {:.6} (CE {:.6})", l.total, l.cross_entropy);

    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for idx in ndarray::indices(net.w_in.dim()) {
        let (mut p, mut q) = (net.clone(), net.clone());
        p.w_in[idx] += eps;
        q.w_in[idx] -= eps;
        let fd = (loss(&p, &xs, scale, &reg) - loss(&q, &xs, scale, &reg)) / (2.0 * eps);
        let a = g.d_w_in[idx];
        let rel = (a - fd).abs() / (a.abs() + fd.abs()).max(1e-12);
        worst = worst.max(rel);
        println!("dL/dW_in{idx:?}: analytic {a:+.8}, numeric {fd:+.8}");
    }
    println!("largest relative error {worst:.2e}");
    Ok(())
}
