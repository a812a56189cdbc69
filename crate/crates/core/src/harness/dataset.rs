//! Dataset container and its two on-disk forms.
//!
//! Binary (little-endian): magic `b"TSD1"`, `f64` sampling rate, `u16`
//! class count, each class name as `u8` length + UTF-8 bytes, `u32` sample
//! count, then per sample: `u8` label, `u16` n_taxels, `u32` n_frames and
//! `n_frames × n_taxels` bytes, frame by frame.
//!
//! CSV: header `label,sample,t0,…,t{n-1}`, one row per frame. `label` is
//! the class name, `sample` an integer id; rows of one sample are
//! consecutive. Classes are numbered in order of first appearance.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::container::Cursor;
use crate::error::{Error, Result};
use crate::event_codec::FrameSequence;

const MAGIC: &[u8; 4] = b"TSD1";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<FrameSequence>,
    pub class_names: Vec<String>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Option<String>,
    /// SHA-256 of the file the dataset was read from, hex encoded.
    pub checksum: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Binary,
    Csv,
}

impl DatasetFormat {
    /// `.csv` selects CSV, everything else the binary form.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Binary,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Dataset {
    pub fn new(samples: Vec<FrameSequence>, class_names: Vec<String>) -> Result<Self> {
        let d = Dataset {
            samples,
            class_names,
            provenance: Provenance::default(),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.samples.first() else {
            return Ok(());
        };
        for (i, s) in self.samples.iter().enumerate() {
            s.validate()?;
            if s.n_taxels() != first.n_taxels() {
                return Err(Error::invalid(format!(
                    "sample {i} has {} taxels, expected {}",
                    s.n_taxels(),
                    first.n_taxels()
                )));
            }
            if s.sampling_rate_hz() != first.sampling_rate_hz() {
                return Err(Error::invalid(format!("sample {i} has a different sampling rate")));
            }
            if s.label() >= self.class_names.len() {
                return Err(Error::LabelOutOfRange {
                    label: s.label(),
                    n_classes: self.class_names.len(),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label()).collect()
    }

    /// Samples per class, indexed by label.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes()];
        for s in &self.samples {
            c[s.label()] += 1;
        }
        c
    }

    pub fn to_binary(&self) -> Result<Vec<u8>> {
        let fs = self.samples.first().map_or(0.0, |s| s.sampling_rate_hz());
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&fs.to_le_bytes());
        out.extend_from_slice(&(self.class_names.len() as u16).to_le_bytes());
        for name in &self.class_names {
            let b = name.as_bytes();
            if b.len() > 255 {
                return Err(Error::invalid("class name longer than 255 bytes"));
            }
            out.push(b.len() as u8);
            out.extend_from_slice(b);
        }
        out.extend_from_slice(&(self.samples.len() as u32).to_le_bytes());
        for s in &self.samples {
            out.push(u8::try_from(s.label()).map_err(|_| Error::invalid("label exceeds 255"))?);
            out.extend_from_slice(&(s.n_taxels() as u16).to_le_bytes());
            out.extend_from_slice(&(s.n_frames() as u32).to_le_bytes());
            for &v in s.values().t().iter() {
                if v.fract() != 0.0 {
                    return Err(Error::invalid(format!("value {v} is not an 8-bit integer")));
                }
                out.push(v as u8);
            }
        }
        Ok(out)
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if bytes.is_empty() {
            return Err(Error::parse("empty dataset file"));
        }
        if cur.take(4)? != MAGIC {
            return Err(Error::parse("not a TSD1 dataset (bad magic)"));
        }
        let fs = cur.f64()?;
        let n_classes = cur.u16()? as usize;
        let mut class_names = Vec::with_capacity(n_classes);
        for _ in 0..n_classes {
            let len = cur.u8()? as usize;
            let name = std::str::from_utf8(cur.take(len)?).map_err(|e| Error::parse(e.to_string()))?;
            class_names.push(name.to_string());
        }
        let n = cur.u32()? as usize;
        let mut samples = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let label = cur.u8()? as usize;
            let n_taxels = cur.u16()? as usize;
            let n_frames = cur.u32()? as usize;
            let raw = cur.take(n_taxels * n_frames)?;
            let frame_major = Array2::from_shape_fn((n_frames, n_taxels), |(f, t)| raw[f * n_taxels + t] as f64);
            samples.push(FrameSequence::new(frame_major.reversed_axes().as_standard_layout().into_owned(), fs, label)?);
        }
        if !cur.is_empty() {
            return Err(Error::parse("trailing bytes after dataset"));
        }
        Dataset::new(samples, class_names)
    }

    pub fn to_csv(&self) -> Result<String> {
        let n_taxels = self.samples.first().map_or(0, |s| s.n_taxels());
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["label".to_string(), "sample".to_string()];
        header.extend((0..n_taxels).map(|t| format!("t{t}")));
        w.write_record(&header)?;
        for (id, s) in self.samples.iter().enumerate() {
            for f in 0..s.n_frames() {
                let mut row = vec![self.class_names[s.label()].clone(), id.to_string()];
                row.extend((0..n_taxels).map(|t| s.values()[[t, f]].to_string()));
                w.write_record(&row)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn from_csv(text: &str, sampling_rate_hz: f64) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::parse("empty dataset file"));
        }
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers()?.clone();
        if header.len() < 3 || &header[0] != "label" || &header[1] != "sample" {
            return Err(Error::parse("CSV header must start with `label,sample,` followed by taxel columns"));
        }
        let n_taxels = header.len() - 2;
        let mut class_names: Vec<String> = Vec::new();
        let mut samples = Vec::new();
        let mut current: Option<(String, usize, Vec<Vec<f64>>)> = None;
        let flush = |cur: Option<(String, usize, Vec<Vec<f64>>)>,
                     names: &[String],
                     out: &mut Vec<FrameSequence>|
         -> Result<()> {
            if let Some((name, _, frames)) = cur {
                let label = names.iter().position(|n| *n == name).expect("registered");
                out.push(FrameSequence::from_frames(&frames, sampling_rate_hz, label)?);
            }
            Ok(())
        };
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::parse(format!("row {}: {what}", line + 2));
            if rec.len() != n_taxels + 2 {
                return Err(bad("wrong number of columns"));
            }
            let name = rec[0].to_string();
            let id: usize = rec[1].trim().parse().map_err(|_| bad("sample id is not an integer"))?;
            let frame = rec
                .iter()
                .skip(2)
                .map(|v| v.trim().parse::<f64>().map_err(|_| bad("taxel value is not a number")))
                .collect::<Result<Vec<f64>>>()?;
            if !class_names.contains(&name) {
                class_names.push(name.clone());
            }
            match &mut current {
                Some((n, i, frames)) if *i == id && *n == name => frames.push(frame),
                _ => {
                    flush(current.take(), &class_names, &mut samples)?;
                    current = Some((name, id, vec![frame]));
                }
            }
        }
        flush(current, &class_names, &mut samples)?;
        Dataset::new(samples, class_names)
    }

    pub fn save(&self, path: &Path, format: DatasetFormat) -> Result<()> {
        match format {
            DatasetFormat::Binary => std::fs::write(path, self.to_binary()?)?,
            DatasetFormat::Csv => std::fs::write(path, self.to_csv()?)?,
        }
        Ok(())
    }
}

/// Read a dataset, recording the file's SHA-256. When `expected_checksum` is
/// given, a mismatch is an error.
pub fn load_dataset(
    path: &Path,
    format: DatasetFormat,
    sampling_rate_hz: f64,
    expected_checksum: Option<&str>,
) -> Result<Dataset> {
    let bytes = std::fs::read(path)?;
    let checksum = sha256_hex(&bytes);
    if let Some(want) = expected_checksum {
        if !want.eq_ignore_ascii_case(&checksum) {
            return Err(Error::invalid(format!("checksum mismatch: expected {want}, file has {checksum}")));
        }
    }
    let mut d = match format {
        DatasetFormat::Binary => Dataset::from_binary(&bytes)?,
        DatasetFormat::Csv => {
            let text = std::str::from_utf8(&bytes).map_err(|e| Error::parse(e.to_string()))?;
            Dataset::from_csv(text, sampling_rate_hz)?
        }
    };
    d.provenance = Provenance {
        source: Some(path.display().to_string()),
        checksum: Some(checksum),
    };
    Ok(d)
}
