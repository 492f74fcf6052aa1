//! Binary vector files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic   7 bytes   "XDEMB1\0"
//! rows    u32
//! dim     u32
//! data    rows * dim f32, row-major
//! ids     rows * (u32 byte length, UTF-8 bytes)
//! ```

use std::fs;
use std::path::Path;

use super::EmbeddingMatrix;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 7] = b"XDEMB1\0";

/// Decoded file contents before any norm checks.
#[derive(Debug, Clone, PartialEq)]
pub struct RawVectors {
    pub ids: Vec<String>,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl RawVectors {
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

pub fn encode(ids: &[String], dim: usize, data: &[f32]) -> Vec<u8> {
    let id_bytes: usize = ids.iter().map(|s| 4 + s.len()).sum();
    let mut out = Vec::with_capacity(15 + data.len() * 4 + id_bytes);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(ids.len() as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for x in data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for id in ids {
        out.extend_from_slice(&(id.len() as u32).to_le_bytes());
        out.extend_from_slice(id.as_bytes());
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Length(format!(
                "{what}: need {n} bytes at offset {}, file has {}",
                self.pos,
                self.buf.len()
            ))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode(buf: &[u8]) -> Result<RawVectors> {
    let head = &buf[..buf.len().min(MAGIC.len())];
    if head != &MAGIC[..head.len()] {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let mut cur = Cursor { buf, pos: 0 };
    cur.take(MAGIC.len(), "magic")?;
    let rows = cur.u32("row count")? as usize;
    let dim = cur.u32("dimension")? as usize;
    if dim == 0 {
        return Err(Error::Format("dimension is zero".into()));
    }
    let n = rows
        .checked_mul(dim)
        .ok_or_else(|| Error::Format("row count overflows".into()))?;
    let floats = cur.take(
        n.checked_mul(4)
            .ok_or_else(|| Error::Format("row count overflows".into()))?,
        "vector data",
    )?;
    let data = floats
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let mut ids = Vec::with_capacity(rows);
    for i in 0..rows {
        let len = cur.u32("id length")? as usize;
        let bytes = cur.take(len, "id")?;
        let id = std::str::from_utf8(bytes)
            .map_err(|_| Error::Format(format!("id {i} is not valid UTF-8")))?;
        ids.push(id.to_string());
    }
    if cur.pos != buf.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after id list",
            buf.len() - cur.pos
        )));
    }
    Ok(RawVectors { ids, dim, data })
}

pub fn write_matrix(matrix: &EmbeddingMatrix, path: &Path) -> Result<()> {
    let bytes = encode(matrix.ids(), matrix.dim(), matrix.as_slice());
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_raw(path: &Path) -> Result<RawVectors> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Loads a file whose rows must already be unit vectors.
pub fn read_matrix(path: &Path) -> Result<EmbeddingMatrix> {
    let raw = read_raw(path)?;
    EmbeddingMatrix::new(raw.ids, raw.dim, raw.data)
}
