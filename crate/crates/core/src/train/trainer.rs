//! Mini-batch training loop with a stratified train/test split.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backward::{backward_chunk, SampleGrad, TransposedGrads};
use super::config::TrainConfig;
use super::loss::{cross_entropy_grad, loss_breakdown, reg_grad_hidden, LossBreakdown};
use super::optim::Adamax;
use crate::error::{Error, Result};
use crate::event_codec::BinnedSpikeTensor;
use crate::snn::{forward, infer, predict, argmax_count, NetworkDef};

/// Samples per parallel work unit. Gradients of the units are summed in
/// index order, so results do not depend on the thread count.
const CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_acc: f64,
    pub test_acc: f64,
    /// Mean over the epoch's batches, weighted by batch size.
    pub loss: LossBreakdown,
    /// Hidden spikes per training sample.
    pub hidden_spike_mean: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights of the epoch with the highest test accuracy.
    pub net: NetworkDef,
    pub metrics: Vec<EpochMetrics>,
    /// 0 when no epoch ran.
    pub best_epoch: usize,
    pub best_test_acc: f64,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Normal initialization: forward weights with standard deviation
/// `fwd_weight_scale / √fan_in`, recurrent weights additionally scaled by
/// `weight_scale_factor`.
pub fn init_network(n_inputs: usize, n_outputs: usize, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<NetworkDef> {
    cfg.validate()?;
    let h = cfg.hidden_size;
    let mut draw = |rows: usize, cols: usize, std: f64| {
        let dist = Normal::new(0.0, std).expect("finite std");
        ndarray::Array2::from_shape_simple_fn((rows, cols), || if std > 0.0 { dist.sample(rng) } else { 0.0 })
    };
    let w_in = draw(h, n_inputs, cfg.fwd_weight_scale / (n_inputs as f64).sqrt());
    let v_rec = if cfg.recurrent {
        Some(draw(h, h, cfg.fwd_weight_scale * cfg.weight_scale_factor / (h as f64).sqrt()))
    } else {
        None
    };
    let w_out = draw(n_outputs, h, cfg.fwd_weight_scale / (h as f64).sqrt());
    let lif = cfg.lif_params()?;
    NetworkDef::new(w_in, v_rec, w_out, lif, lif)
}

/// Per-class shuffled split; each class with at least two samples keeps at
/// least one on each side. Returns sorted `(train, test)` index lists.
pub fn stratified_split(labels: &[usize], test_fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(rng);
        let n = idx.len();
        let mut n_test = (n as f64 * test_fraction).round() as usize;
        if n >= 2 {
            n_test = n_test.clamp(1, n - 1);
        } else {
            n_test = 0;
        }
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn check_dataset(samples: &[BinnedSpikeTensor], n_outputs: usize) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let max = samples.iter().map(|s| s.label()).max().unwrap();
    if max >= n_outputs {
        return Err(Error::LabelOutOfRange {
            label: max,
            n_classes: n_outputs,
        });
    }
    let mut seen = vec![false; max + 1];
    for s in samples {
        seen[s.label()] = true;
    }
    if let Some(c) = seen.iter().position(|&s| !s) {
        return Err(Error::invalid(format!("class {c} has no samples")));
    }
    let (t, ch) = (samples[0].n_steps(), samples[0].n_channels());
    if samples.iter().any(|s| s.n_steps() != t || s.n_channels() != ch) {
        return Err(Error::invalid("samples differ in shape"));
    }
    Ok(())
}

/// Fraction of samples whose predicted class equals the label.
pub fn evaluate(net: &NetworkDef, samples: &[&BinnedSpikeTensor]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let correct: Vec<usize> = samples
        .par_chunks(CHUNK)
        .map(|chunk| -> Result<usize> {
            let mut n = 0;
            for x in chunk {
                n += (argmax_count(&infer(net, x)?.output_counts) == x.label()) as usize;
            }
            Ok(n)
        })
        .collect::<Result<_>>()?;
    Ok(correct.iter().sum::<usize>() as f64 / samples.len() as f64)
}

struct BatchResult {
    grads: TransposedGrads,
    out_counts: Vec<Vec<f64>>,
    hid_counts: Vec<Vec<f64>>,
    correct: usize,
}

fn batch_gradients(net: &NetworkDef, batch: &[&BinnedSpikeTensor], cfg: &TrainConfig) -> Result<BatchResult> {
    let n_batch = batch.len();
    let reg = cfg.reg_params();
    let parts: Vec<BatchResult> = batch
        .par_chunks(CHUNK)
        .map(|chunk| -> Result<BatchResult> {
            let mut part = BatchResult {
                grads: TransposedGrads::new(net),
                out_counts: Vec::with_capacity(chunk.len()),
                hid_counts: Vec::with_capacity(chunk.len()),
                correct: 0,
            };
            let traces = chunk.iter().map(|x| forward(net, x)).collect::<Result<Vec<_>>>()?;
            let items: Vec<SampleGrad<'_>> = chunk
                .iter()
                .zip(&traces)
                .map(|(&x, trace)| SampleGrad {
                    input: x,
                    trace,
                    g_counts: cross_entropy_grad(&trace.output_counts, x.label(), n_batch),
                    g_hidden: reg_grad_hidden(&trace.hidden_counts, trace.n_steps(), n_batch, &reg),
                })
                .collect();
            backward_chunk(net, &items, cfg.scale, &mut part.grads)?;
            for (x, trace) in chunk.iter().zip(traces) {
                part.correct += (predict(&trace) == x.label()) as usize;
                part.out_counts.push(trace.output_counts);
                part.hid_counts.push(trace.hidden_counts);
            }
            Ok(part)
        })
        .collect::<Result<_>>()?;
    let mut parts = parts.into_iter();
    let mut total = parts.next().expect("non-empty batch");
    for p in parts {
        total.grads.add_assign(&p.grads);
        total.out_counts.extend(p.out_counts);
        total.hid_counts.extend(p.hid_counts);
        total.correct += p.correct;
    }
    Ok(total)
}

/// Train `net` on the given split; returns the best-test-accuracy weights.
pub fn train_on(
    mut net: NetworkDef,
    train: &[&BinnedSpikeTensor],
    test: &[&BinnedSpikeTensor],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(NetworkDef, Vec<EpochMetrics>)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    let reg = cfg.reg_params();
    let mut opt = Adamax::new(&net, cfg.learning_rate);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, NetworkDef)> = None;
    let mut metrics = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(rng);
        let mut loss_sum = LossBreakdown::default();
        let mut correct = 0;
        let mut hidden_spikes = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<&BinnedSpikeTensor> = idx.iter().map(|&i| train[i]).collect();
            let res = batch_gradients(&net, &batch, cfg)?;
            let labels: Vec<usize> = batch.iter().map(|x| x.label()).collect();
            let loss = loss_breakdown(&res.out_counts, &res.hid_counts, &labels, batch[0].n_steps(), &reg)?;
            let w = batch.len() as f64;
            loss_sum.cross_entropy += w * loss.cross_entropy;
            loss_sum.reg_l1 += w * loss.reg_l1;
            loss_sum.reg_l2 += w * loss.reg_l2;
            loss_sum.total += w * loss.total;
            correct += res.correct;
            hidden_spikes += res.hid_counts.iter().flatten().sum::<f64>();

            let grads = res.grads.into_gradients();
            if !grads.is_finite() {
                return Err(Error::NonFinite("gradients"));
            }
            opt.step(&mut net, &grads);
        }
        let n = train.len() as f64;
        let m = EpochMetrics {
            epoch,
            train_acc: correct as f64 / n,
            test_acc: evaluate(&net, test)?,
            loss: LossBreakdown {
                cross_entropy: loss_sum.cross_entropy / n,
                reg_l1: loss_sum.reg_l1 / n,
                reg_l2: loss_sum.reg_l2 / n,
                total: loss_sum.total / n,
            },
            hidden_spike_mean: hidden_spikes / n,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} train {:.3} test {:.3}",
            m.loss.total,
            m.train_acc,
            m.test_acc
        );
        metrics.push(m);
        if best.as_ref().is_none_or(|(acc, _)| m.test_acc > *acc) {
            best = Some((m.test_acc, net.clone()));
        }
        if cfg.target_accuracy.is_some_and(|t| m.test_acc >= t) {
            break;
        }
    }
    Ok((best.map_or(net, |(_, n)| n), metrics))
}

/// Seeded initialization, stratified split and training on prepared
/// (copy-expanded) inputs.
pub fn train(samples: &[BinnedSpikeTensor], n_outputs: usize, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_dataset(samples, n_outputs)?;
    let mut rng = rng_from_seed(cfg.seed);
    let labels: Vec<usize> = samples.iter().map(|s| s.label()).collect();
    let (train_idx, test_idx) = stratified_split(&labels, cfg.test_fraction, &mut rng);
    let net = init_network(samples[0].n_channels(), n_outputs, cfg, &mut rng)?;
    let train_set: Vec<&BinnedSpikeTensor> = train_idx.iter().map(|&i| &samples[i]).collect();
    let test_set: Vec<&BinnedSpikeTensor> = test_idx.iter().map(|&i| &samples[i]).collect();
    let (net, metrics) = train_on(net, &train_set, &test_set, cfg, &mut rng)?;
    let (best_epoch, best_test_acc) = match metrics.iter().fold(None::<&EpochMetrics>, |b, m| match b {
        Some(b) if b.test_acc >= m.test_acc => Some(b),
        _ => Some(m),
    }) {
        Some(m) => (m.epoch, m.test_acc),
        None => (0, evaluate(&net, &test_set)?),
    };
    Ok(TrainOutcome {
        net,
        metrics,
        best_epoch,
        best_test_acc,
        train_indices: train_idx,
        test_indices: test_idx,
    })
}

/// CSV with header
/// `epoch,train_acc,test_acc,L,L1,L2,L_tot,hidden_spike_mean`.
pub fn write_metrics_csv<W: Write>(metrics: &[EpochMetrics], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "train_acc", "test_acc", "L", "L1", "L2", "L_tot", "hidden_spike_mean"])?;
    for m in metrics {
        w.write_record([
            m.epoch.to_string(),
            m.train_acc.to_string(),
            m.test_acc.to_string(),
            m.loss.cross_entropy.to_string(),
            m.loss.reg_l1.to_string(),
            m.loss.reg_l2.to_string(),
            m.loss.total.to_string(),
            m.hidden_spike_mean.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;
    use crate::event_codec::input_copies;

    /// Two classes: class 0 drives the first half of the channels, class 1
    /// the second half.
    pub(crate) fn separable(n_per_class: usize, seed: u64) -> Vec<BinnedSpikeTensor> {
        use rand::Rng;
        let mut rng = rng_from_seed(seed);
        let (t, c) = (20, 8);
        let mut out = Vec::new();
        for i in 0..2 * n_per_class {
            let label = i % 2;
            let mut x = BinnedSpikeTensor::zeros(t, c, 1.0, label);
            for s in 0..t {
                for ch in 0..c / 2 {
                    if rng.random_bool(0.4) {
                        x.set(s, ch + label * c / 2);
                    }
                }
            }
            out.push(x);
        }
        out
    }

    pub(crate) fn toy_inputs(copies: usize) -> Vec<BinnedSpikeTensor> {
        separable(6, 11).iter().map(|x| input_copies(x, copies).unwrap()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    use super::tests_support::separable;

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            hidden_size: 16,
            batch_size: 8,
            epochs: 50,
            learning_rate: 0.01,
            scale: 5.0,
            time_bin_size: 1.0,
            tau_mem: 10.0,
            tau_ratio: 2.0,
            fwd_weight_scale: 3.0,
            reg_spikes: 0.0,
            reg_neurons: 0.0,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn learns_separable_patterns() {
        let data = separable(20, 1);
        let out = train(&data, 2, &small_cfg()).unwrap();
        let best_train = out.metrics.iter().map(|m| m.train_acc).fold(0.0, f64::max);
        assert_eq!(best_train, 1.0, "{:?}", out.metrics.last());
        assert!(out.best_test_acc >= 0.9);
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let data = separable(6, 2);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            ..small_cfg()
        };
        let out = train(&data, 2, &cfg).unwrap();
        let mut rng = rng_from_seed(cfg.seed);
        let labels: Vec<usize> = data.iter().map(|s| s.label()).collect();
        stratified_split(&labels, cfg.test_fraction, &mut rng);
        let init = init_network(8, 2, &cfg, &mut rng).unwrap();
        assert_eq!(out.net, init);
        let l0 = out.metrics[0].loss.total;
        assert!(out.metrics.iter().all(|m| (m.loss.total - l0).abs() < 1e-12));
    }

    #[test]
    fn same_seed_same_trajectory() {
        let data = separable(8, 3);
        let cfg = TrainConfig { epochs: 4, ..small_cfg() };
        let a = train(&data, 2, &cfg).unwrap();
        let b = train(&data, 2, &cfg).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.net, b.net);
        let c = train(&data, 2, &TrainConfig { seed: 9, ..cfg }).unwrap();
        assert_ne!(a.net, c.net);
    }

    #[test]
    fn split_is_stratified() {
        let labels: Vec<usize> = (0..100).map(|i| i % 4).collect();
        let (tr, te) = stratified_split(&labels, 0.2, &mut rng_from_seed(0));
        assert_eq!(te.len(), 20);
        assert_eq!(tr.len(), 80);
        for c in 0..4 {
            assert_eq!(te.iter().filter(|&&i| labels[i] == c).count(), 5);
        }
    }

    #[test]
    fn empty_class_is_rejected() {
        let mut data = separable(3, 4);
        data.retain(|x| x.label() == 1);
        assert!(train(&data, 2, &small_cfg()).is_err());
        assert!(train(&[], 2, &small_cfg()).is_err());
        assert!(train(&separable(3, 4), 1, &small_cfg()).is_err());
    }

    #[test]
    fn init_statistics() {
        let cfg = TrainConfig {
            hidden_size: 200,
            fwd_weight_scale: 2.0,
            weight_scale_factor: 0.1,
            ..TrainConfig::default()
        };
        let net = init_network(400, 10, &cfg, &mut rng_from_seed(5)).unwrap();
        let std = |a: &ndarray::Array2<f64>| (a.iter().map(|x| x * x).sum::<f64>() / a.len() as f64).sqrt();
        assert!((std(&net.w_in) - 2.0 / 20.0).abs() < 0.005);
        assert!((std(net.v_rec.as_ref().unwrap()) - 0.2 / 200f64.sqrt()).abs() < 0.001);
        assert!((std(&net.w_out) - 2.0 / 200f64.sqrt()).abs() < 0.01);
    }

    #[test]
    fn metrics_csv_header() {
        let mut buf = Vec::new();
        let m = EpochMetrics {
            epoch: 1,
            train_acc: 0.5,
            test_acc: 0.25,
            loss: LossBreakdown::default(),
            hidden_spike_mean: 3.0,
        };
        write_metrics_csv(&[m], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("epoch,train_acc,test_acc,L,L1,L2,L_tot,hidden_spike_mean\n1,0.5,0.25,"));
    }
}
