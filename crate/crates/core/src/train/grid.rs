//! Hyperparameter search over time binning and input copies, plus an
//! optional seeded random search over the full hyperparameter space.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::trainer::{rng_from_seed, train};
use crate::error::{Error, Result};
use crate::event_codec::BinnedSpikeTensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpace {
    pub time_bin_sizes: Vec<f64>,
    pub nb_input_copies: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub threshold: f64,
    pub time_bin_size: f64,
    pub nb_input_copies: usize,
    pub test_acc: f64,
    pub best_epoch: usize,
    /// Set on the preset grid point for this threshold.
    pub preset_optimum: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    /// Index into `rows` of the highest accuracy; ties keep the earliest.
    pub best: usize,
}

impl GridResult {
    pub fn best_row(&self) -> &GridRow {
        &self.rows[self.best]
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Train one network per grid point. `prepare(bin_ms, copies)` returns the
/// binned, copy-expanded inputs for that point.
pub fn grid_search<F>(space: &GridSpace, base: &TrainConfig, n_outputs: usize, mut prepare: F) -> Result<GridResult>
where
    F: FnMut(f64, usize) -> Result<Vec<BinnedSpikeTensor>>,
{
    if space.time_bin_sizes.is_empty() || space.nb_input_copies.is_empty() {
        return Err(Error::invalid("grid must have at least one point"));
    }
    let optimum = TrainConfig::preset_grid_point(base.threshold);
    let mut rows = Vec::new();
    for &bin in &space.time_bin_sizes {
        for &copies in &space.nb_input_copies {
            let cfg = TrainConfig {
                time_bin_size: bin,
                nb_input_copies: copies,
                ..base.clone()
            };
            let inputs = prepare(bin, copies)?;
            let out = train(&inputs, n_outputs, &cfg)?;
            log::info!("grid ϑ={} bin={bin} copies={copies}: {:.3}", base.threshold, out.best_test_acc);
            rows.push(GridRow {
                threshold: base.threshold,
                time_bin_size: bin,
                nb_input_copies: copies,
                test_acc: out.best_test_acc,
                best_epoch: out.best_epoch,
                preset_optimum: optimum == Some((bin, copies)),
            });
        }
    }
    let best = (0..rows.len())
        .fold(0, |b, i| if rows[i].test_acc > rows[b].test_acc { i } else { b });
    Ok(GridResult { rows, best })
}

/// Bounds of the random search, one closed interval or choice list per
/// hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub scale: Vec<f64>,
    pub time_bin_size: Vec<f64>,
    pub nb_input_copies: Vec<usize>,
    pub tau_mem: (f64, f64),
    pub tau_ratio: Vec<f64>,
    pub fwd_weight_scale: (f64, f64),
    pub weight_scale_factor: (f64, f64),
    pub reg_neurons: Vec<f64>,
    pub reg_spikes: (f64, f64),
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            scale: vec![5.0, 10.0, 15.0, 20.0],
            time_bin_size: vec![1.0, 2.0, 3.0, 4.0, 5.0, 10.0],
            nb_input_copies: vec![1, 2, 4, 8],
            tau_mem: (20.0, 80.0),
            tau_ratio: vec![2.0, 5.0, 10.0],
            fwd_weight_scale: (0.5, 4.0),
            weight_scale_factor: (1e-3, 5e-2),
            reg_neurons: vec![0.0, 1e-6, 1e-5],
            reg_spikes: (0.0, 5e-3),
        }
    }
}

impl SearchSpace {
    pub fn sample<R: Rng>(&self, base: &TrainConfig, rng: &mut R) -> TrainConfig {
        fn pick<T: Copy, R: Rng>(v: &[T], rng: &mut R) -> T {
            v[rng.random_range(0..v.len())]
        }
        fn within<R: Rng>((lo, hi): (f64, f64), rng: &mut R) -> f64 {
            if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            }
        }
        TrainConfig {
            scale: pick(&self.scale, rng),
            time_bin_size: pick(&self.time_bin_size, rng),
            nb_input_copies: pick(&self.nb_input_copies, rng),
            tau_mem: within(self.tau_mem, rng),
            tau_ratio: pick(&self.tau_ratio, rng),
            fwd_weight_scale: within(self.fwd_weight_scale, rng),
            weight_scale_factor: within(self.weight_scale_factor, rng),
            reg_neurons: pick(&self.reg_neurons, rng),
            reg_spikes: within(self.reg_spikes, rng),
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub config: TrainConfig,
    pub test_acc: f64,
}

/// `n_trials` configurations drawn from `space` with `seed`; trials are
/// returned in draw order.
pub fn random_search<F>(
    space: &SearchSpace,
    base: &TrainConfig,
    n_outputs: usize,
    n_trials: usize,
    seed: u64,
    mut prepare: F,
) -> Result<Vec<Trial>>
where
    F: FnMut(f64, usize) -> Result<Vec<BinnedSpikeTensor>>,
{
    let mut rng = rng_from_seed(seed);
    let mut trials = Vec::with_capacity(n_trials);
    for _ in 0..n_trials {
        let cfg = space.sample(base, &mut rng);
        let inputs = prepare(cfg.time_bin_size, cfg.nb_input_copies)?;
        let out = train(&inputs, n_outputs, &cfg)?;
        trials.push(Trial {
            config: cfg,
            test_acc: out.best_test_acc,
        });
    }
    Ok(trials)
}
