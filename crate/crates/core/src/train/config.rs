//! Training hyperparameters and their flat TOML representation.
//!
//! Keys use the hyperparameter names of the search space verbatim (`scale`,
//! `time_bin_size`, `nb_input_copies`, `tau_mem`, `tau_ratio`,
//! `fwd_weight_scale`, `weight_scale_factor`, `reg_neurons`, `reg_spikes`)
//! plus the optimizer and bookkeeping settings below. Any key can be
//! overridden by an environment variable `TACTILE_<KEY>` (upper case), whose
//! value is parsed as a TOML literal and falls back to a string.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::loss::RegParams;
use crate::error::{Error, Result};
use crate::snn::LifParams;

pub const ENV_PREFIX: &str = "TACTILE_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Sigma-delta threshold the inputs were encoded with.
    pub threshold: f64,
    /// Surrogate gradient steepness λ.
    pub scale: f64,
    pub time_bin_size: f64,
    pub nb_input_copies: usize,
    pub tau_mem: f64,
    pub tau_ratio: f64,
    pub fwd_weight_scale: f64,
    pub weight_scale_factor: f64,
    pub reg_neurons: f64,
    pub reg_spikes: f64,
    pub reg_lower_threshold: f64,
    pub reg_lower_strength: f64,
    pub reg_upper_threshold: f64,
    pub reg_upper_strength: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub hidden_size: usize,
    pub recurrent: bool,
    pub firing_threshold: f64,
    pub test_fraction: f64,
    /// Stop once test accuracy reaches this value.
    pub target_accuracy: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::preset(2.0).expect("preset exists")
    }
}

/// The four optimized settings, one per encoding threshold.
const PRESETS: [(f64, f64, f64, usize, f64, f64, f64, f64, f64); 4] = [
    // ϑ, scale, bin, copies, tau_mem, fws, wsf, reg_spikes, reg_neurons
    (1.0, 5.0, 5.0, 2, 60.0, 1.0, 1e-2, 4e-3, 1e-6),
    (2.0, 15.0, 3.0, 8, 50.0, 1.0, 2e-2, 1.5e-3, 0.0),
    (5.0, 10.0, 3.0, 4, 70.0, 1.5, 3.5e-2, 1e-3, 0.0),
    (10.0, 10.0, 5.0, 2, 70.0, 4.0, 1.5e-2, 1.5e-3, 0.0),
];

impl TrainConfig {
    pub const KEYS: &'static [&'static str] = &[
        "threshold",
        "scale",
        "time_bin_size",
        "nb_input_copies",
        "tau_mem",
        "tau_ratio",
        "fwd_weight_scale",
        "weight_scale_factor",
        "reg_neurons",
        "reg_spikes",
        "reg_lower_threshold",
        "reg_lower_strength",
        "reg_upper_threshold",
        "reg_upper_strength",
        "learning_rate",
        "batch_size",
        "epochs",
        "hidden_size",
        "recurrent",
        "firing_threshold",
        "test_fraction",
        "target_accuracy",
        "seed",
    ];

    /// Tuned settings for encoding threshold 1, 2, 5 or 10.
    pub fn preset(threshold: f64) -> Option<Self> {
        let &(t, scale, bin, copies, tau_mem, fws, wsf, reg_spikes, reg_neurons) =
            PRESETS.iter().find(|p| p.0 == threshold)?;
        let reg = RegParams::default();
        Some(TrainConfig {
            threshold: t,
            scale,
            time_bin_size: bin,
            nb_input_copies: copies,
            tau_mem,
            tau_ratio: 10.0,
            fwd_weight_scale: fws,
            weight_scale_factor: wsf,
            reg_neurons,
            reg_spikes,
            reg_lower_threshold: reg.lower_threshold,
            reg_lower_strength: reg.lower_strength,
            reg_upper_threshold: reg.upper_threshold,
            reg_upper_strength: reg.upper_strength,
            learning_rate: 0.0015,
            batch_size: 128,
            epochs: 300,
            hidden_size: 450,
            recurrent: true,
            firing_threshold: 1.0,
            test_fraction: 0.2,
            target_accuracy: None,
            seed: 0,
        })
    }

    /// `(time_bin_size, nb_input_copies)` of the preset for `threshold`.
    pub fn preset_grid_point(threshold: f64) -> Option<(f64, usize)> {
        Self::preset(threshold).map(|c| (c.time_bin_size, c.nb_input_copies))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("threshold", self.threshold),
            ("scale", self.scale),
            ("time_bin_size", self.time_bin_size),
            ("tau_mem", self.tau_mem),
            ("tau_ratio", self.tau_ratio),
            ("firing_threshold", self.firing_threshold),
        ];
        for (k, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{k} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("learning_rate", self.learning_rate),
            ("fwd_weight_scale", self.fwd_weight_scale),
            ("weight_scale_factor", self.weight_scale_factor),
            ("reg_neurons", self.reg_neurons),
            ("reg_spikes", self.reg_spikes),
            ("reg_lower_threshold", self.reg_lower_threshold),
            ("reg_lower_strength", self.reg_lower_strength),
            ("reg_upper_threshold", self.reg_upper_threshold),
            ("reg_upper_strength", self.reg_upper_strength),
        ];
        for (k, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{k} must be non-negative, got {v}")));
            }
        }
        if self.batch_size == 0 || self.nb_input_copies == 0 || self.hidden_size == 0 {
            return Err(Error::Config(
                "batch_size, nb_input_copies and hidden_size must be at least 1".into(),
            ));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config("test_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn reg_params(&self) -> RegParams {
        RegParams {
            lower_threshold: self.reg_lower_threshold,
            lower_strength: self.reg_lower_strength,
            upper_threshold: self.reg_upper_threshold,
            upper_strength: self.reg_upper_strength,
            reg_neurons: self.reg_neurons,
            reg_spikes: self.reg_spikes,
        }
    }

    /// Same time constants for hidden and output layers.
    pub fn lif_params(&self) -> Result<LifParams> {
        Ok(LifParams::from_ratio(self.tau_mem, self.tau_ratio, self.time_bin_size)?
            .with_threshold(self.firing_threshold))
    }

    pub fn from_table(table: &toml::Table) -> Result<Self> {
        reject_unknown(table, Self::KEYS)?;
        let cfg: TrainConfig = toml::Value::Table(table.clone())
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_table(&parse_table(text)?)
    }

    /// Read a config file and apply `TACTILE_*` environment overrides.
    pub fn load(path: &Path) -> Result<Self> {
        let mut table = parse_table(&std::fs::read_to_string(path)?)?;
        apply_overrides(&mut table, Self::KEYS, std::env::vars());
        Self::from_table(&table)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }
}

pub fn parse_table(text: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>().map_err(|e| Error::Config(e.to_string()))
}

pub fn reject_unknown(table: &toml::Table, known: &[&str]) -> Result<()> {
    for k in table.keys() {
        if !known.contains(&k.as_str()) {
            return Err(Error::Config(format!("unknown config key `{k}`")));
        }
    }
    Ok(())
}

fn parse_literal(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Overwrite `known` keys from `TACTILE_<KEY>` variables; other variables are
/// ignored.
pub fn apply_overrides<I>(table: &mut toml::Table, known: &[&str], vars: I)
where
    I: IntoIterator<Item = (String, String)>,
{
    for (name, value) in vars {
        let Some(key) = name.strip_prefix(ENV_PREFIX) else {
            continue;
        };
        let key = key.to_ascii_lowercase();
        if known.contains(&key.as_str()) {
            table.insert(key, parse_literal(&value));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_hold_the_tuned_values() {
        let c = TrainConfig::preset(2.0).unwrap();
        assert_eq!((c.scale, c.time_bin_size, c.nb_input_copies), (15.0, 3.0, 8));
        assert_eq!((c.tau_mem, c.tau_ratio), (50.0, 10.0));
        assert_eq!((c.fwd_weight_scale, c.weight_scale_factor), (1.0, 2e-2));
        assert_eq!((c.reg_spikes, c.reg_neurons), (1.5e-3, 0.0));
        assert_eq!(TrainConfig::preset_grid_point(1.0), Some((5.0, 2)));
        assert_eq!(TrainConfig::preset_grid_point(5.0), Some((3.0, 4)));
        assert_eq!(TrainConfig::preset_grid_point(10.0), Some((5.0, 2)));
        assert_eq!(TrainConfig::preset(10.0).unwrap().fwd_weight_scale, 4.0);
        assert_eq!(TrainConfig::preset(1.0).unwrap().reg_neurons, 1e-6);
        assert!(TrainConfig::preset(3.0).is_none());
        assert_eq!((c.learning_rate, c.batch_size), (0.0015, 128));
    }

    #[test]
    fn toml_roundtrip_and_partial_files() {
        let c = TrainConfig::preset(5.0).unwrap();
        assert_eq!(TrainConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
        let partial = TrainConfig::from_toml_str("tau_mem = 40.0\nepochs = 3\n").unwrap();
        assert_eq!(partial.tau_mem, 40.0);
        assert_eq!(partial.epochs, 3);
        assert_eq!(partial.scale, TrainConfig::default().scale);
    }

    #[test]
    fn bad_files_are_rejected() {
        assert!(TrainConfig::from_toml_str("tau_mme = 40.0").is_err());
        assert!(TrainConfig::from_toml_str("batch_size = 0").is_err());
        assert!(TrainConfig::from_toml_str("learning_rate = -1.0").is_err());
        assert!(TrainConfig::from_toml_str("epochs = \"many\"").is_err());
    }

    #[test]
    fn environment_overrides() {
        let mut t = parse_table("tau_mem = 40.0").unwrap();
        let vars = [
            ("TACTILE_TAU_MEM", "55.5"),
            ("TACTILE_EPOCHS", "7"),
            ("TACTILE_SNN_DATASET", "/tmp/x"),
            ("OTHER", "1"),
        ];
        apply_overrides(&mut t, TrainConfig::KEYS, vars.iter().map(|(a, b)| (a.to_string(), b.to_string())));
        let c = TrainConfig::from_table(&t).unwrap();
        assert_eq!(c.tau_mem, 55.5);
        assert_eq!(c.epochs, 7);
    }

    #[test]
    fn lif_params_follow_ratio() {
        let c = TrainConfig::preset(2.0).unwrap();
        let p = c.lif_params().unwrap();
        assert_eq!(p.tau_syn_ms, 5.0);
        assert!((p.beta - (-3.0f64 / 50.0).exp()).abs() < 1e-15);
    }
}
