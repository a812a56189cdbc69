use ndarray::{concatenate, Array2, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use tactile_snn::event_codec::BinnedSpikeTensor;
use tactile_snn::quant::{
    float_synops, loihi_step, quantize_weights, quantized_forward, quantized_forward_with, LoihiState, QuantParams,
    QuantizedNetwork, SynOpReport,
};
use tactile_snn::snn::{forward, LifParams, NetworkDef};

fn lif() -> LifParams {
    LifParams::new(20.0, 10.0, 1.0).unwrap()
}

fn random_net(seed: u64, i: usize, h: usize, o: usize, recurrent: bool) -> NetworkDef {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut m = |r, c, s: f64| Array2::from_shape_fn((r, c), |_| rng.random_range(-s..s));
    let w_in = m(h, i, 0.6);
    let v = recurrent.then(|| m(h, h, 0.2));
    NetworkDef::new(w_in, v, m(o, h, 0.6), lif(), lif()).unwrap()
}

fn random_input(seed: u64, t: usize, c: usize, p: f64) -> BinnedSpikeTensor {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut x = BinnedSpikeTensor::zeros(t, c, 1.0, 0);
    for s in 0..t {
        for ch in 0..c {
            if rng.random_bool(p) {
                x.set(s, ch);
            }
        }
    }
    x
}

/// Straightforward per-step simulation with an explicit synop tally.
fn tally(q: &QuantizedNetwork, x: &BinnedSpikeTensor, blank: usize) -> (Vec<u64>, SynOpReport) {
    let (n_in, h) = (q.n_inputs(), q.hidden_size());
    let hidden_w = match &q.v_rec {
        Some(v) => concatenate(Axis(1), &[q.w_in.view(), v.view()]).unwrap(),
        None => q.w_in.clone(),
    };
    let mut hs = LoihiState::zeros(h);
    let mut os = LoihiState::zeros(q.n_outputs());
    let mut counts = vec![0u64; q.n_outputs()];
    let mut r = SynOpReport {
        n_samples: 1,
        ..Default::default()
    };
    for t in 0..x.n_steps() + blank {
        let mut pre: Vec<usize> = (0..n_in).filter(|&c| t < x.n_steps() && x.get(t, c)).collect();
        let n_events = pre.len() as u64;
        if q.is_recurrent() {
            pre.extend((0..h).filter(|&j| hs.spikes[j]).map(|j| n_in + j));
        }
        loihi_step(&mut hs, &q.hidden, &hidden_w, &pre).unwrap();
        let fired: Vec<usize> = (0..h).filter(|&j| hs.spikes[j]).collect();
        loihi_step(&mut os, &q.out, &q.w_out, &fired).unwrap();
        for (c, &s) in counts.iter_mut().zip(&os.spikes) {
            if s {
                r.output_spikes += 1;
                if t < x.n_steps() {
                    *c += 1;
                }
            }
        }
        r.input_events += n_events;
        r.hidden_spikes += fired.len() as u64;
        // every input event reaches all hidden neurons; every hidden spike
        // reaches the outputs and, when recurrent, the hidden layer again
        r.synops += n_events * h as u64;
        r.synops += fired.len() as u64 * (q.n_outputs() + if q.is_recurrent() { h } else { 0 }) as u64;
    }
    (counts, r)
}

#[test]
fn synops_match_the_step_tally() {
    for (seed, recurrent) in [(1, false), (2, true), (3, true), (4, false)] {
        let q = QuantizedNetwork::from_float(&random_net(seed, 6, 8, 3, recurrent)).unwrap();
        for blank in [0, 100] {
            let xs: Vec<_> = (0..4).map(|k| random_input(seed * 100 + k, 30, 6, 0.3)).collect();
            let out = quantized_forward_with(&q, &xs, blank).unwrap();
            let mut total = SynOpReport::default();
            for (i, x) in xs.iter().enumerate() {
                let (counts, r) = tally(&q, x, blank);
                assert_eq!(out.output_counts[i], counts);
                total.merge(&r);
            }
            assert_eq!(out.report, total);
            assert!(out.report.hidden_spikes > 0);
        }
    }
}

#[test]
fn feedforward_identity() {
    let q = QuantizedNetwork::from_float(&random_net(9, 6, 8, 28, false)).unwrap();
    let x = random_input(90, 40, 6, 0.3);
    let r = quantized_forward(&q, &[x]).unwrap().report;
    assert_eq!(r.synops, r.input_events * 8 + r.hidden_spikes * 28);
}

#[test]
fn recurrence_adds_synops_on_identical_inputs() {
    let ff = random_net(11, 6, 10, 3, false);
    let mut rec = ff.clone();
    rec.v_rec = Some(Array2::from_elem((10, 10), 0.05));
    let xs: Vec<_> = (0..5).map(|k| random_input(k, 40, 6, 0.3)).collect();
    let a = quantized_forward(&QuantizedNetwork::from_float(&ff).unwrap(), &xs).unwrap().report;
    let b = quantized_forward(&QuantizedNetwork::from_float(&rec).unwrap(), &xs).unwrap().report;
    assert_eq!(a.input_events, b.input_events);
    assert!(b.synops > a.synops, "{} vs {}", b.synops, a.synops);
    let fa = float_synops(&ff, &xs).unwrap();
    let fb = float_synops(&rec, &xs).unwrap();
    assert!(fb.synops > fa.synops);
}

#[test]
fn bit_exact_across_runs() {
    let net = random_net(21, 8, 12, 4, true);
    let xs: Vec<_> = (0..16).map(|k| random_input(200 + k, 50, 8, 0.2)).collect();
    let a = quantized_forward(&QuantizedNetwork::from_float(&net).unwrap(), &xs).unwrap();
    let b = quantized_forward(&QuantizedNetwork::from_float(&net.clone()).unwrap(), &xs).unwrap();
    assert_eq!(a, b);
    let serial: Vec<_> = xs.iter().map(|x| quantized_forward(&QuantizedNetwork::from_float(&net).unwrap(), std::slice::from_ref(x)).unwrap()).collect();
    for (i, s) in serial.iter().enumerate() {
        assert_eq!(s.output_counts[0], a.output_counts[i]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn quantization_error_is_bounded(values in prop::collection::vec(-3.0f64..3.0, 1..40)) {
        prop_assume!(values.iter().any(|v| v.abs() > 1e-6));
        let m = Array2::from_shape_vec((1, values.len()), values.clone()).unwrap();
        let (q, s, _) = quantize_weights(&[&m], 1.0).unwrap();
        for (w, wq) in values.iter().zip(q[0].iter()) {
            prop_assert!((*wq as f64 / s as f64 - w).abs() <= 1.0 / s as f64 + 1e-12);
        }
    }

    #[test]
    fn larger_delta_decays_faster(
        current in -100_000i64..100_000,
        voltage in -100_000i64..100_000,
        d1 in 0i64..=4096,
        d2 in 0i64..=4096,
        steps in 1usize..20,
    ) {
        let (lo, hi) = (d1.min(d2), d1.max(d2));
        let run = |d: i64| {
            let p = QuantParams { delta_current: d, delta_voltage: d, w_scale: 1, threshold: i64::MAX };
            let mut s = LoihiState::zeros(1);
            s.current[0] = current;
            s.voltage[0] = voltage;
            let mut cur = Vec::new();
            for _ in 0..steps {
                loihi_step(&mut s, &p, &Array2::zeros((1, 1)), &[]).unwrap();
                cur.push(s.current[0]);
            }
            cur
        };
        for (slow, fast) in run(lo).iter().zip(run(hi)) {
            prop_assert!(fast.abs() <= slow.abs());
        }
    }

    #[test]
    fn calm_neuron_stays_silent(seed in 0u64..10_000, frac in 0.01f64..0.5, tau_mem in 2.0f64..50.0, tau_syn in 1.0f64..20.0) {
        let p = LifParams::new(tau_mem, tau_syn, 1.0).unwrap();
        // the steady response to one spike per step is w / ((1 − α)(1 − β))
        let w = frac * (1.0 - p.alpha) * (1.0 - p.beta) * p.firing_threshold;
        let net = NetworkDef::new(
            Array2::from_elem((1, 1), w), None, Array2::from_elem((1, 1), 1.0), p, p,
        ).unwrap();
        let x = random_input(seed, 60, 1, 0.7);
        let tr = forward(&net, &x).unwrap();
        prop_assert!(tr.hidden.voltage.iter().all(|&u| u < 0.5 * p.firing_threshold));
        let q = QuantizedNetwork::from_float(&net).unwrap();
        let r = quantized_forward_with(&q, &[x], 0).unwrap().report;
        prop_assert_eq!(tr.hidden_spike_total(), 0.0);
        prop_assert_eq!(r.hidden_spikes, 0);
    }

    #[test]
    fn synops_are_additive(seed in 0u64..1000, n in 1usize..6, recurrent in any::<bool>()) {
        let q = QuantizedNetwork::from_float(&random_net(seed, 5, 7, 3, recurrent)).unwrap();
        let xs: Vec<_> = (0..n as u64).map(|k| random_input(seed * 31 + k, 25, 5, 0.3)).collect();
        let whole = quantized_forward(&q, &xs).unwrap();
        let mut sum = SynOpReport::default();
        for x in &xs {
            sum.merge(&quantized_forward(&q, std::slice::from_ref(x)).unwrap().report);
        }
        prop_assert_eq!(whole.report, sum);
    }
}
