//! Synaptic-operation counting: each presynaptic spike costs one operation
//! per postsynaptic target.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::event_codec::BinnedSpikeTensor;
use crate::snn::{infer, NetworkDef};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynOpReport {
    pub n_samples: u64,
    pub input_events: u64,
    pub hidden_spikes: u64,
    pub output_spikes: u64,
    pub synops: u64,
}

impl SynOpReport {
    pub fn merge(&mut self, other: &SynOpReport) {
        self.n_samples += other.n_samples;
        self.input_events += other.input_events;
        self.hidden_spikes += other.hidden_spikes;
        self.output_spikes += other.output_spikes;
        self.synops += other.synops;
    }

    fn per_sample(&self, v: u64) -> f64 {
        if self.n_samples == 0 {
            0.0
        } else {
            v as f64 / self.n_samples as f64
        }
    }

    pub fn synops_per_sample(&self) -> f64 {
        self.per_sample(self.synops)
    }

    pub fn input_events_per_sample(&self) -> f64 {
        self.per_sample(self.input_events)
    }

    pub fn hidden_spikes_per_sample(&self) -> f64 {
        self.per_sample(self.hidden_spikes)
    }

    pub fn output_spikes_per_sample(&self) -> f64 {
        self.per_sample(self.output_spikes)
    }
}

/// Synops of the float network over the input windows only.
pub fn float_synops(net: &NetworkDef, inputs: &[BinnedSpikeTensor]) -> Result<SynOpReport> {
    let mut report = SynOpReport::default();
    for x in inputs {
        let s = infer(net, x)?;
        let hidden = s.hidden_counts.iter().sum::<f64>() as u64;
        report.merge(&SynOpReport {
            n_samples: 1,
            input_events: s.input_spikes as u64,
            hidden_spikes: hidden,
            output_spikes: s.output_counts.iter().sum::<f64>() as u64,
            synops: s.input_spikes as u64 * net.hidden_size() as u64 + hidden * net.hidden_fanout() as u64,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::{forward, LifParams};
    use ndarray::array;

    fn net(recurrent: bool) -> NetworkDef {
        let lif = LifParams::from_decays(0.8, 0.9, 1.0).unwrap();
        NetworkDef::new(
            array![[1.2, 0.3], [0.4, 1.1], [0.9, 0.9]],
            recurrent.then(|| array![[0.0, 0.3, 0.0], [0.2, 0.0, 0.1], [0.0, 0.0, 0.0]]),
            array![[1.0, 0.2, 0.1], [0.0, 0.5, 1.3]],
            lif,
            lif,
        )
        .unwrap()
    }

    fn input() -> BinnedSpikeTensor {
        let mut x = BinnedSpikeTensor::zeros(8, 2, 1.0, 0);
        for (t, c) in [(0, 0), (1, 0), (1, 1), (3, 1), (4, 0), (6, 1), (7, 0)] {
            x.set(t, c);
        }
        x
    }

    /// Walk the recorded raster and add up the targets of every spike.
    fn tally(net: &NetworkDef, x: &BinnedSpikeTensor) -> u64 {
        let tr = forward(net, x).unwrap();
        let mut ops = 0u64;
        for t in 0..x.n_steps() {
            for c in 0..x.n_channels() {
                if x.get(t, c) {
                    ops += net.hidden_size() as u64;
                }
            }
            for j in 0..net.hidden_size() {
                if tr.hidden.spikes[[t, j]] == 1.0 {
                    ops += net.n_outputs() as u64;
                    if net.is_recurrent() {
                        ops += net.hidden_size() as u64;
                    }
                }
            }
        }
        ops
    }

    #[test]
    fn counts_match_per_step_tally() {
        for recurrent in [false, true] {
            let n = net(recurrent);
            let r = float_synops(&n, &[input()]).unwrap();
            assert_eq!(r.synops, tally(&n, &input()));
            assert_eq!(r.input_events, 7);
            assert!(r.hidden_spikes > 0);
        }
    }

    #[test]
    fn reports_are_additive() {
        let n = net(true);
        let a = float_synops(&n, &[input()]).unwrap();
        let both = float_synops(&n, &[input(), input()]).unwrap();
        let mut sum = a;
        sum.merge(&a);
        assert_eq!(both, sum);
        assert_eq!(both.synops_per_sample(), a.synops as f64);
    }
}
