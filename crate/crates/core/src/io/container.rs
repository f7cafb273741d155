//! Binary tensor container used for weights, calibration batches and
//! quantized bundles.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! header   magic "QSWT" | version u32 | byte order u8 (1 = little) | 3 zero bytes | record count u32
//! record   name len u16 | name (UTF-8) | encoding u8 | rank u8 | rank × dim u32 | payload len u64 | payload
//! ```
//!
//! Encodings: 0 raw f32, 1 packed fixed-point codes, 2 packed k-means
//! indices with their shared-value table, 3 UTF-8 JSON. See `docs/formats.md`
//! for the payload layouts.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::io::bits::{packed_len, BitReader, BitWriter};
use crate::quant::{FixedParams, KMeansTable, RangeKind};
use crate::tensor::{shape_numel, Tensor};

pub const MAGIC: &[u8; 4] = b"QSWT";
pub const VERSION: u32 = 1;
pub const LITTLE_ENDIAN: u8 = 1;

const FIXED_HEADER: usize = 1 + 4 + 1;
const KMEANS_HEADER: usize = 1 + 1 + 1 + 4 + 1 + 8 + 8 + 4;

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    F32(Vec<f32>),
    Fixed { params: FixedParams, codes: Vec<i64> },
    KMeans { table: KMeansTable, indices: Vec<u32> },
    Json(String),
}

impl Payload {
    fn encoding(&self) -> u8 {
        match self {
            Payload::F32(_) => 0,
            Payload::Fixed { .. } => 1,
            Payload::KMeans { .. } => 2,
            Payload::Json(_) => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub name: String,
    pub shape: Vec<usize>,
    pub payload: Payload,
}

impl Record {
    pub fn tensor(name: impl Into<String>, t: &Tensor) -> Self {
        Self {
            name: name.into(),
            shape: t.shape().to_vec(),
            payload: Payload::F32(t.data().to_vec()),
        }
    }

    pub fn json(name: impl Into<String>, text: String) -> Self {
        let len = text.len().max(1);
        Self {
            name: name.into(),
            shape: vec![len],
            payload: Payload::Json(text),
        }
    }

    /// Decoded float values; quantized payloads are dequantized.
    pub fn to_tensor(&self) -> Result<Tensor> {
        let data = match &self.payload {
            Payload::F32(v) => v.clone(),
            Payload::Fixed { params, codes } => codes.iter().map(|&c| params.dequantize(c)).collect(),
            Payload::KMeans { table, indices } => indices.iter().map(|&i| table.center(i)).collect(),
            Payload::Json(_) => {
                return Err(Error::Container(format!("record `{}` is not a tensor", self.name)))
            }
        };
        Tensor::new(self.shape.clone(), data)
    }

    /// Payload size in bytes as written.
    pub fn payload_len(&self) -> u64 {
        let n = shape_numel(&self.shape) as u64;
        match &self.payload {
            Payload::F32(v) => v.len() as u64 * 4,
            Payload::Fixed { params, .. } => FIXED_HEADER as u64 + packed_len(n, params.bw as u32),
            Payload::KMeans { table, .. } => {
                KMEANS_HEADER as u64
                    + packed_len(table.center_codes.len() as u64, table.table.bw as u32)
                    + packed_len(n, table.bw as u32)
            }
            Payload::Json(s) => s.len() as u64,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Container {
    pub records: Vec<Record>,
}

impl Container {
    pub fn get(&self, name: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn push(&mut self, record: Record) {
        self.records.push(record);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(LITTLE_ENDIAN);
        out.extend_from_slice(&[0; 3]);
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for r in &self.records {
            out.extend_from_slice(&(r.name.len() as u16).to_le_bytes());
            out.extend_from_slice(r.name.as_bytes());
            out.push(r.payload.encoding());
            out.push(r.shape.len() as u8);
            for &d in &r.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            let payload = encode_payload(r);
            out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
            out.extend_from_slice(&payload);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(Error::Container("bad magic".into()));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: VERSION,
            });
        }
        if cur.u8()? != LITTLE_ENDIAN {
            return Err(Error::Container("unsupported byte order".into()));
        }
        if cur.take(3)? != [0, 0, 0] {
            return Err(Error::Container("reserved header bytes must be zero".into()));
        }
        let count = cur.u32()?;
        let mut records = Vec::new();
        let mut names = HashSet::new();
        for _ in 0..count {
            let record = read_record(&mut cur)?;
            if !names.insert(record.name.clone()) {
                return Err(Error::Container(format!("duplicate record `{}`", record.name)));
            }
            records.push(record);
        }
        if cur.pos != bytes.len() {
            return Err(Error::Container("trailing bytes after last record".into()));
        }
        Ok(Self { records })
    }
}

fn encode_payload(r: &Record) -> Vec<u8> {
    match &r.payload {
        Payload::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        Payload::Fixed { params, codes } => {
            let mut out = vec![params.bw];
            out.extend_from_slice(&params.il.to_le_bytes());
            out.push(params.fl as u8);
            let mut w = BitWriter::new();
            for &c in codes {
                w.write_signed(c, params.bw as u32);
            }
            out.extend(w.into_bytes());
            out
        }
        Payload::KMeans { table, indices } => {
            let mut out = vec![
                table.bw,
                match table.dist {
                    RangeKind::Linear => 0,
                    RangeKind::Gaussian => 1,
                },
                table.table.bw,
            ];
            out.extend_from_slice(&table.table.il.to_le_bytes());
            out.push(table.table.fl as u8);
            out.extend_from_slice(&table.range_lo.to_le_bytes());
            out.extend_from_slice(&table.range_hi.to_le_bytes());
            out.extend_from_slice(&(table.center_codes.len() as u32).to_le_bytes());
            let mut w = BitWriter::new();
            for &c in &table.center_codes {
                w.write_signed(c, table.table.bw as u32);
            }
            out.extend(w.into_bytes());
            let mut w = BitWriter::new();
            for &i in indices {
                w.write(i as u64, table.bw as u32);
            }
            out.extend(w.into_bytes());
            out
        }
        Payload::Json(s) => s.as_bytes().to_vec(),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Container("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn read_record(cur: &mut Cursor<'_>) -> Result<Record> {
    let name_len = cur.u16()? as usize;
    let name = std::str::from_utf8(cur.take(name_len)?)
        .map_err(|_| Error::Container("record name is not UTF-8".into()))?
        .to_string();
    let bad = |msg: &str| Error::Container(format!("record `{name}`: {msg}"));
    let encoding = cur.u8()?;
    let rank = cur.u8()? as usize;
    if rank == 0 || rank > 4 {
        return Err(bad("rank must be 1..=4"));
    }
    let mut shape = Vec::with_capacity(rank);
    let mut numel: u64 = 1;
    for _ in 0..rank {
        let d = cur.u32()?;
        if d == 0 {
            return Err(bad("zero extent"));
        }
        numel = numel.checked_mul(d as u64).ok_or_else(|| bad("extent overflow"))?;
        shape.push(d as usize);
    }
    let len = cur.u64()?;
    let payload_bytes = cur.take(usize::try_from(len).map_err(|_| bad("payload too large"))?)?;
    let mut p = Cursor {
        bytes: payload_bytes,
        pos: 0,
    };
    let payload = match encoding {
        0 => {
            if len != numel * 4 {
                return Err(bad("f32 payload length does not match shape"));
            }
            let values: Vec<f32> = payload_bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            if !values.iter().all(|v| v.is_finite()) {
                return Err(bad("non-finite value"));
            }
            Payload::F32(values)
        }
        1 => {
            let bw = p.u8()?;
            let il = p.i32()?;
            let fl = p.u8()? as i32;
            let params = FixedParams::new(bw, il, fl).map_err(|e| bad(&e.to_string()))?;
            if len != FIXED_HEADER as u64 + packed_len(numel, bw as u32) {
                return Err(bad("fixed-point payload length does not match shape"));
            }
            let mut r = BitReader::new(&payload_bytes[p.pos..]);
            let codes = (0..numel)
                .map(|_| r.read_signed(bw as u32).ok_or_else(|| bad("truncated codes")))
                .collect::<Result<Vec<_>>>()?;
            if !r.at_padding() {
                return Err(bad("non-zero padding bits"));
            }
            Payload::Fixed { params, codes }
        }
        2 => {
            let bw = p.u8()?;
            let dist = match p.u8()? {
                0 => RangeKind::Linear,
                1 => RangeKind::Gaussian,
                _ => return Err(bad("unknown range kind")),
            };
            let table_bw = p.u8()?;
            let il = p.i32()?;
            let fl = p.u8()? as i32;
            let lo = p.f64()?;
            let hi = p.f64()?;
            let n_centers = p.u32()? as u64;
            let table_fmt = FixedParams::new(table_bw, il, fl).map_err(|e| bad(&e.to_string()))?;
            let expected = KMEANS_HEADER as u64
                + packed_len(n_centers, table_bw as u32)
                + packed_len(numel, bw as u32);
            if len != expected {
                return Err(bad("k-means payload length does not match shape"));
            }
            let offset = p.pos + packed_len(n_centers, table_bw as u32) as usize;
            let mut r = BitReader::new(&payload_bytes[p.pos..offset]);
            let center_codes = (0..n_centers)
                .map(|_| r.read_signed(table_bw as u32).ok_or_else(|| bad("truncated table")))
                .collect::<Result<Vec<_>>>()?;
            if !r.at_padding() {
                return Err(bad("non-zero padding bits"));
            }
            let table = KMeansTable {
                bw,
                dist,
                range_lo: lo,
                range_hi: hi,
                table: table_fmt,
                center_codes,
            };
            table.validate().map_err(|e| bad(&e.to_string()))?;
            let mut r = BitReader::new(&payload_bytes[offset..]);
            let indices = (0..numel)
                .map(|_| {
                    let i = r.read(bw as u32).ok_or_else(|| bad("truncated indices"))?;
                    if i as usize >= table.center_codes.len() {
                        return Err(bad("index outside table"));
                    }
                    Ok(i as u32)
                })
                .collect::<Result<Vec<_>>>()?;
            if !r.at_padding() {
                return Err(bad("non-zero padding bits"));
            }
            Payload::KMeans { table, indices }
        }
        3 => {
            let text = std::str::from_utf8(payload_bytes)
                .map_err(|_| bad("JSON payload is not UTF-8"))?
                .to_string();
            if shape != vec![text.len().max(1)] {
                return Err(bad("JSON record shape must be [byte length]"));
            }
            Payload::Json(text)
        }
        e => return Err(bad(&format!("unknown encoding {e}"))),
    };
    Ok(Record {
        name,
        shape,
        payload,
    })
}

/// Calibration samples stored one record per sample.
pub fn samples_container(samples: &[Tensor]) -> Container {
    Container {
        records: samples
            .iter()
            .enumerate()
            .map(|(i, t)| Record::tensor(format!("sample_{i:05}"), t))
            .collect(),
    }
}

pub fn samples_from_container(c: &Container) -> Result<Vec<Tensor>> {
    c.records.iter().map(Record::to_tensor).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Container {
        let table = KMeansTable::from_range(-1.0, 1.0, 2, RangeKind::Gaussian, FixedParams::new(16, 0, 14).unwrap())
            .unwrap();
        Container {
            records: vec![
                Record::tensor("a.weight", &Tensor::from_fn(vec![2, 3], |i| i as f32 - 2.5)),
                Record {
                    name: "b.weight".into(),
                    shape: vec![5],
                    payload: Payload::Fixed {
                        params: FixedParams::new(5, 1, 3).unwrap(),
                        codes: vec![-16, -1, 0, 7, 15],
                    },
                },
                Record {
                    name: "c.weight".into(),
                    shape: vec![3],
                    payload: Payload::KMeans {
                        table,
                        indices: vec![0, 3, 2],
                    },
                },
                Record::json("meta", "{\"k\":1}".into()),
            ],
        }
    }

    #[test]
    fn round_trip() {
        let c = sample();
        let bytes = c.to_bytes();
        assert_eq!(&bytes[..4], MAGIC);
        let back = Container::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
        for r in &c.records {
            let _ = r.to_tensor();
        }
        let fixed = back.get("b.weight").unwrap().to_tensor().unwrap();
        assert_eq!(fixed.data(), &[-2.0, -0.125, 0.0, 0.875, 1.875]);
    }

    #[test]
    fn payload_len_matches_encoding() {
        for r in &sample().records {
            assert_eq!(r.payload_len(), encode_payload(r).len() as u64, "{}", r.name);
        }
    }

    #[test]
    fn version_and_trailing_bytes_rejected() {
        let mut bytes = sample().to_bytes();
        bytes[4] = 2;
        assert!(matches!(
            Container::from_bytes(&bytes).unwrap_err(),
            Error::VersionMismatch { found: 2, .. }
        ));
        let mut bytes = sample().to_bytes();
        bytes.push(0);
        assert!(Container::from_bytes(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn mutated_bytes_parse_cleanly_or_fail(pos in any::<prop::sample::Index>(), byte in any::<u8>()) {
            let mut bytes = sample().to_bytes();
            let i = pos.index(bytes.len());
            bytes[i] = byte;
            if let Ok(c) = Container::from_bytes(&bytes) {
                // accepted input re-serializes to a value that parses identically
                let again = Container::from_bytes(&c.to_bytes()).unwrap();
                prop_assert_eq!(again, c);
            }
        }

        #[test]
        fn truncation_never_panics(cut in 0usize..200) {
            let bytes = sample().to_bytes();
            let cut = cut.min(bytes.len());
            let _ = Container::from_bytes(&bytes[..cut]);
        }
    }
}
