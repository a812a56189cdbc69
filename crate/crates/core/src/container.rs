//! Self-describing binary container of named, typed n-dimensional datasets.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        4 bytes  b"TNC1"
//! n_datasets   u32
//! repeated n_datasets times:
//!   name_len   u16
//!   name       name_len bytes, UTF-8
//!   dtype      u8       0 = f64, 1 = i64, 2 = UTF-8 text
//!   ndim       u8
//!   dims       ndim x u64
//!   payload    product(dims) x 8 bytes for f64/i64, dims[0] bytes for text
//! ```
//!
//! Dataset order is preserved; names must be unique.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TNC1";

#[derive(Debug, Clone, PartialEq)]
pub enum Data {
    F64(Vec<f64>),
    I64(Vec<i64>),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dims: Vec<usize>,
    pub data: Data,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Container {
    order: Vec<String>,
    entries: BTreeMap<String, Dataset>,
}

impl Container {
    pub fn new() -> Self {
        Self::default()
    }

    fn insert(&mut self, name: &str, ds: Dataset) {
        if self.entries.insert(name.to_string(), ds).is_none() {
            self.order.push(name.to_string());
        }
    }

    pub fn put_f64(&mut self, name: &str, dims: &[usize], values: Vec<f64>) {
        debug_assert_eq!(dims.iter().product::<usize>(), values.len());
        self.insert(
            name,
            Dataset {
                dims: dims.to_vec(),
                data: Data::F64(values),
            },
        );
    }

    pub fn put_i64(&mut self, name: &str, dims: &[usize], values: Vec<i64>) {
        debug_assert_eq!(dims.iter().product::<usize>(), values.len());
        self.insert(
            name,
            Dataset {
                dims: dims.to_vec(),
                data: Data::I64(values),
            },
        );
    }

    pub fn put_scalar(&mut self, name: &str, value: f64) {
        self.put_f64(name, &[1], vec![value]);
    }

    pub fn put_int(&mut self, name: &str, value: i64) {
        self.put_i64(name, &[1], vec![value]);
    }

    pub fn put_text(&mut self, name: &str, text: &str) {
        self.insert(
            name,
            Dataset {
                dims: vec![text.len()],
                data: Data::Text(text.to_string()),
            },
        );
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    fn get(&self, name: &str) -> Result<&Dataset> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::parse(format!("missing dataset `{name}`")))
    }

    pub fn f64s(&self, name: &str) -> Result<(&[usize], &[f64])> {
        let ds = self.get(name)?;
        match &ds.data {
            Data::F64(v) => Ok((&ds.dims, v)),
            _ => Err(Error::parse(format!("dataset `{name}` is not f64"))),
        }
    }

    pub fn i64s(&self, name: &str) -> Result<(&[usize], &[i64])> {
        let ds = self.get(name)?;
        match &ds.data {
            Data::I64(v) => Ok((&ds.dims, v)),
            _ => Err(Error::parse(format!("dataset `{name}` is not i64"))),
        }
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        let (_, v) = self.f64s(name)?;
        v.first()
            .copied()
            .ok_or_else(|| Error::parse(format!("dataset `{name}` is empty")))
    }

    pub fn int(&self, name: &str) -> Result<i64> {
        let (_, v) = self.i64s(name)?;
        v.first()
            .copied()
            .ok_or_else(|| Error::parse(format!("dataset `{name}` is empty")))
    }

    pub fn text(&self, name: &str) -> Result<&str> {
        match &self.get(name)?.data {
            Data::Text(s) => Ok(s),
            _ => Err(Error::parse(format!("dataset `{name}` is not text"))),
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.order.len() as u32).to_le_bytes())?;
        for name in &self.order {
            let ds = &self.entries[name];
            w.write_all(&(name.len() as u16).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            let dtype: u8 = match ds.data {
                Data::F64(_) => 0,
                Data::I64(_) => 1,
                Data::Text(_) => 2,
            };
            w.write_all(&[dtype, ds.dims.len() as u8])?;
            for &d in &ds.dims {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            match &ds.data {
                Data::F64(v) => {
                    for x in v {
                        w.write_all(&x.to_le_bytes())?;
                    }
                }
                Data::I64(v) => {
                    for x in v {
                        w.write_all(&x.to_le_bytes())?;
                    }
                }
                Data::Text(s) => w.write_all(s.as_bytes())?,
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(Error::parse("not a TNC1 container (bad magic)"));
        }
        let n = cur.u32()? as usize;
        let mut out = Container::new();
        for _ in 0..n {
            let name_len = cur.u16()? as usize;
            let name = std::str::from_utf8(cur.take(name_len)?)
                .map_err(|_| Error::parse("dataset name is not UTF-8"))?
                .to_string();
            let dtype = cur.u8()?;
            let ndim = cur.u8()? as usize;
            let mut dims = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                dims.push(cur.u64()? as usize);
            }
            let count: usize = dims.iter().product();
            let data = match dtype {
                0 => Data::F64(
                    cur.take(count.checked_mul(8).ok_or_else(|| Error::parse("size overflow"))?)?
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                ),
                1 => Data::I64(
                    cur.take(count.checked_mul(8).ok_or_else(|| Error::parse("size overflow"))?)?
                        .chunks_exact(8)
                        .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                ),
                2 => Data::Text(
                    std::str::from_utf8(cur.take(count)?)
                        .map_err(|_| Error::parse("text dataset is not UTF-8"))?
                        .to_string(),
                ),
                other => return Err(Error::parse(format!("unknown dtype {other}"))),
            };
            if out.contains(&name) {
                return Err(Error::parse(format!("duplicate dataset `{name}`")));
            }
            out.insert(&name, Dataset { dims, data });
        }
        if cur.pos != bytes.len() {
            return Err(Error::parse("trailing bytes after last dataset"));
        }
        Ok(out)
    }
}

pub(crate) struct Cursor<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::parse(format!("unexpected end of data at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.bytes.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_order_and_values() {
        let mut c = Container::new();
        c.put_text("kind", "network");
        c.put_f64("w", &[2, 3], vec![1.0, -2.5, 3.0, 0.0, f64::MIN_POSITIVE, 7.0]);
        c.put_i64("q", &[2], vec![-256, 254]);
        c.put_scalar("alpha", 0.5);
        let back = Container::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.names().collect::<Vec<_>>(), ["kind", "w", "q", "alpha"]);
        assert_eq!(back.f64s("w").unwrap().0, &[2, 3]);
    }

    #[test]
    fn rejects_truncated_and_bad_magic() {
        let mut c = Container::new();
        c.put_scalar("x", 1.0);
        let bytes = c.to_bytes();
        assert!(Container::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Container::from_bytes(b"XXXX\0\0\0\0").is_err());
        assert!(Container::from_bytes(&[]).is_err());
    }

    #[test]
    fn type_mismatch_is_an_error() {
        let mut c = Container::new();
        c.put_int("n", 3);
        assert!(c.f64s("n").is_err());
        assert_eq!(c.int("n").unwrap(), 3);
        assert!(c.scalar("missing").is_err());
    }
}
