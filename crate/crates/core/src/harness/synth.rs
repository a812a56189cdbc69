//! Seeded synthetic Braille recordings.
//!
//! A 3 × 4 taxel patch (three rows matching the Braille dot rows, four
//! columns along the slide direction) moves over a 2 × 3 dot cell at
//! 20 mm/s. Each dot under a taxel produces a Gaussian pressure bump; the
//! start position of every repetition is jittered.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::event_codec::FrameSequence;
use crate::train::rng_from_seed;

pub const N_TAXELS: usize = 12;
pub const TAXEL_ROWS: usize = 3;

/// Dot bitmasks (bit `k` is Braille dot `k + 1`) for `a`–`z` and space.
pub const BRAILLE: [(&str, u8); 27] = [
    ("a", 0b000001),
    ("b", 0b000011),
    ("c", 0b001001),
    ("d", 0b011001),
    ("e", 0b010001),
    ("f", 0b001011),
    ("g", 0b011011),
    ("h", 0b010011),
    ("i", 0b001010),
    ("j", 0b011010),
    ("k", 0b000101),
    ("l", 0b000111),
    ("m", 0b001101),
    ("n", 0b011101),
    ("o", 0b010101),
    ("p", 0b001111),
    ("q", 0b011111),
    ("r", 0b010111),
    ("s", 0b001110),
    ("t", 0b011110),
    ("u", 0b100101),
    ("v", 0b100111),
    ("w", 0b111010),
    ("x", 0b101101),
    ("y", 0b111101),
    ("z", 0b110101),
    ("space", 0b000000),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub sampling_rate_hz: f64,
    pub n_frames: usize,
    pub speed_mm_s: f64,
    /// Peak bump height in sensor units.
    pub amplitude: f64,
    /// Bump width along the slide, mm.
    pub sigma_along_mm: f64,
    /// Bump width across rows, in row pitches.
    pub sigma_across_rows: f64,
    /// Distance between taxel columns, mm.
    pub column_pitch_mm: f64,
    /// Distance between the two dot columns, mm.
    pub dot_pitch_mm: f64,
    /// Position of the first dot column relative to the leading taxel at
    /// time zero, mm.
    pub cell_offset_mm: f64,
    /// Standard deviation of the start position, mm.
    pub start_jitter_mm: f64,
    /// Standard deviation of the per-sample amplitude gain.
    pub gain_jitter: f64,
    /// Rest level every taxel is tared to at the first frame.
    pub baseline: f64,
    pub noise_std: f64,
    /// Dot layouts to use instead of the Braille alphabet.
    pub patterns: Option<Vec<u8>>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sampling_rate_hz: 40.0,
            n_frames: 54,
            speed_mm_s: 20.0,
            amplitude: 12.0,
            sigma_along_mm: 1.0,
            sigma_across_rows: 0.35,
            column_pitch_mm: 4.0,
            dot_pitch_mm: 2.5,
            cell_offset_mm: 14.0,
            start_jitter_mm: 1.0,
            gain_jitter: 0.1,
            baseline: 0.0,
            noise_std: 0.3,
            patterns: None,
        }
    }
}

/// `(row, column)` of each dot in `mask`; dots 1–3 form the first column.
fn dots(mask: u8) -> Vec<(usize, usize)> {
    (0..6).filter(|k| mask >> k & 1 == 1).map(|k| (k % 3, k / 3)).collect()
}

/// Noise-free pressure of `taxel` at `time_s` for a finger started at
/// `start_mm`.
fn pressure(cfg: &SynthConfig, mask: u8, taxel: usize, time_s: f64, start_mm: f64) -> f64 {
    let (row, col) = (taxel % TAXEL_ROWS, taxel / TAXEL_ROWS);
    let x_taxel = start_mm + cfg.speed_mm_s * time_s - col as f64 * cfg.column_pitch_mm;
    dots(mask)
        .into_iter()
        .map(|(dr, dc)| {
            let dx = cfg.cell_offset_mm + dc as f64 * cfg.dot_pitch_mm - x_taxel;
            let dy = dr as f64 - row as f64;
            (-0.5 * (dx / cfg.sigma_along_mm).powi(2) - 0.5 * (dy / cfg.sigma_across_rows).powi(2)).exp()
        })
        .sum()
}

pub fn synth_with(cfg: &SynthConfig, n_classes: usize, n_repetitions: usize, seed: u64) -> Result<Dataset> {
    let (names, masks): (Vec<String>, Vec<u8>) = match &cfg.patterns {
        Some(p) => (0..p.len()).map(|i| (format!("p{i}"), p[i])).unzip(),
        None => BRAILLE.iter().map(|(n, m)| (n.to_string(), *m)).unzip(),
    };
    if n_classes == 0 || n_classes > masks.len() {
        return Err(Error::invalid(format!("n_classes must be in 1..={}", masks.len())));
    }
    let jitter = Normal::new(0.0, cfg.start_jitter_mm).map_err(|e| Error::invalid(e.to_string()))?;
    let gain = Normal::new(1.0, cfg.gain_jitter).map_err(|e| Error::invalid(e.to_string()))?;
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let mut samples = Vec::with_capacity(n_classes * n_repetitions);
    for _ in 0..n_repetitions {
        for (label, &mask) in masks.iter().enumerate().take(n_classes) {
            let start = jitter.sample(&mut rng);
            let g = gain.sample(&mut rng).max(0.0);
            let mut values = ndarray::Array2::from_shape_fn((N_TAXELS, cfg.n_frames), |(t, f)| {
                let time = f as f64 / cfg.sampling_rate_hz;
                let v = cfg.baseline + g * cfg.amplitude * pressure(cfg, mask, t, time, start) + noise.sample(&mut rng);
                v.round().clamp(0.0, 255.0)
            });
            // tare: every taxel starts at the rest level
            for mut row in values.rows_mut() {
                let offset = row[0] - cfg.baseline;
                row.mapv_inplace(|v| (v - offset).clamp(0.0, 255.0) + 0.0);
            }
            samples.push(FrameSequence::new(values, cfg.sampling_rate_hz, label)?);
        }
    }
    let mut d = Dataset::new(samples, names.into_iter().take(n_classes).collect())?;
    d.provenance.source = Some(format!("synthetic(classes={n_classes}, repetitions={n_repetitions}, seed={seed})"));
    Ok(d)
}

/// Default synthetic recordings: the first `n_classes` letters of the Braille
/// alphabet (`a`–`z`, then space), `n_repetitions` each, 54 frames at 40 Hz.
pub fn synth_dataset(n_classes: usize, n_repetitions: usize, seed: u64) -> Result<Dataset> {
    synth_with(&SynthConfig::default(), n_classes, n_repetitions, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{run_baseline, BaselineMode, BaselineOptions};

    #[test]
    fn shape_and_determinism() {
        let a = synth_dataset(3, 4, 7).unwrap();
        assert_eq!(a.len(), 12);
        assert_eq!(a.class_names, vec!["a", "b", "c"]);
        assert!(a.samples.iter().all(|s| s.n_frames() == 54 && s.n_taxels() == 12));
        assert!((a.samples[0].duration_s() - 1.35).abs() < 1e-12);
        let b = synth_dataset(3, 4, 7).unwrap();
        assert_eq!(a.to_binary().unwrap(), b.to_binary().unwrap());
        assert_ne!(a.to_binary().unwrap(), synth_dataset(3, 4, 8).unwrap().to_binary().unwrap());
        assert_eq!(a.class_counts(), vec![4, 4, 4]);
    }

    #[test]
    fn letters_press_their_rows() {
        let d = synth_dataset(1, 1, 0).unwrap();
        let s = &d.samples[0];
        // `a` is a single dot in the top row: taxels of rows 1 and 2 stay flat.
        let peak = |t: usize| s.taxel(t).iter().cloned().fold(0.0, f64::max);
        assert!(peak(0) > 8.0);
        assert!(peak(1) < 5.0 && peak(2) < 5.0);
        assert!(synth_dataset(28, 1, 0).is_err());
        assert_eq!(synth_dataset(27, 1, 0).unwrap().class_names[26], "space");
    }

    #[test]
    fn disjoint_layouts_are_linearly_separable() {
        let cfg = SynthConfig {
            patterns: Some(vec![0b000001, 0b000100]),
            ..SynthConfig::default()
        };
        let d = synth_with(&cfg, 2, 30, 1).unwrap();
        let cv = run_baseline(&d.samples, BaselineMode::Collapsed, &BaselineOptions::default()).unwrap();
        assert_eq!(cv.mean, 1.0);
    }
}
