//! Event stream file formats.
//!
//! Text: a header line `# n_taxels=<n> duration_s=<d> label=<l>` followed by
//! one event per line, `time_s taxel polarity` with polarity `ON` or `OFF`.
//!
//! Binary (little-endian): magic `b"TEV1"`, `u16` n_taxels, `f64` duration,
//! `u32` label, `u32` event count, then one 11-byte record per event:
//! `f64` time, `u16` taxel, `u8` polarity (1 = ON, 0 = OFF).

use std::fmt::Write as _;

use super::{Event, EventStream, Polarity};
use crate::container::Cursor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TEV1";

pub fn to_text(stream: &EventStream) -> String {
    let mut out = format!(
        "# n_taxels={} duration_s={} label={}\n",
        stream.n_taxels(),
        stream.duration_s(),
        stream.label()
    );
    for e in stream.events() {
        let pol = match e.polarity {
            Polarity::On => "ON",
            Polarity::Off => "OFF",
        };
        writeln!(out, "{} {} {}", e.time_s, e.taxel, pol).unwrap();
    }
    out
}

pub fn from_text(text: &str) -> Result<EventStream> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::parse("empty event file"))?;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| Error::parse("missing `#` header line"))?;
    let (mut n_taxels, mut duration, mut label) = (None, None, 0usize);
    for field in header.split_whitespace() {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| Error::parse(format!("bad header field `{field}`")))?;
        let bad = || Error::parse(format!("bad header value `{field}`"));
        match k {
            "n_taxels" => n_taxels = Some(v.parse::<usize>().map_err(|_| bad())?),
            "duration_s" => duration = Some(v.parse::<f64>().map_err(|_| bad())?),
            "label" => label = v.parse().map_err(|_| bad())?,
            _ => {}
        }
    }
    let n_taxels = n_taxels.ok_or_else(|| Error::parse("header lacks n_taxels"))?;
    let duration = duration.ok_or_else(|| Error::parse("header lacks duration_s"))?;

    let mut events = Vec::new();
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = || Error::parse(format!("line {}: expected `time_s taxel polarity`", lineno + 1));
        let mut parts = line.split_whitespace();
        let time_s: f64 = parts.next().ok_or_else(err)?.parse().map_err(|_| err())?;
        let taxel: u16 = parts.next().ok_or_else(err)?.parse().map_err(|_| err())?;
        let polarity = match parts.next().ok_or_else(err)? {
            "ON" | "on" | "1" => Polarity::On,
            "OFF" | "off" | "0" => Polarity::Off,
            _ => return Err(err()),
        };
        if parts.next().is_some() {
            return Err(err());
        }
        events.push(Event {
            time_s,
            taxel,
            polarity,
        });
    }
    EventStream::new(events, duration, n_taxels, label)
}

pub fn to_binary(stream: &EventStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(22 + 11 * stream.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(stream.n_taxels() as u16).to_le_bytes());
    out.extend_from_slice(&stream.duration_s().to_le_bytes());
    out.extend_from_slice(&(stream.label() as u32).to_le_bytes());
    out.extend_from_slice(&(stream.len() as u32).to_le_bytes());
    for e in stream.events() {
        out.extend_from_slice(&e.time_s.to_le_bytes());
        out.extend_from_slice(&e.taxel.to_le_bytes());
        out.push(matches!(e.polarity, Polarity::On) as u8);
    }
    out
}

pub fn from_binary(bytes: &[u8]) -> Result<EventStream> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::parse("not a TEV1 event file (bad magic)"));
    }
    let n_taxels = cur.u16()? as usize;
    let duration = cur.f64()?;
    let label = cur.u32()? as usize;
    let n = cur.u32()? as usize;
    let mut events = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let time_s = cur.f64()?;
        let taxel = cur.u16()?;
        let polarity = match cur.u8()? {
            1 => Polarity::On,
            0 => Polarity::Off,
            p => return Err(Error::parse(format!("bad polarity byte {p}"))),
        };
        events.push(Event {
            time_s,
            taxel,
            polarity,
        });
    }
    if !cur.is_empty() {
        return Err(Error::parse("trailing bytes after event records"));
    }
    EventStream::new(events, duration, n_taxels, label)
}
