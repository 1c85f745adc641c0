//! Binary tensor snapshots.
//!
//! Layout (all integers little-endian): magic `V2CT`, version `u16`, count
//! `u32`, then per tensor a `u16` name length, UTF-8 name, `u8` rank, `u32`
//! dims and an `f32` payload.

use std::io::{Read, Write};

use crate::error::{Result, TensorError};
use crate::params::ParamStore;
use crate::tensor::Tensor;

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"V2CT";
pub const SNAPSHOT_VERSION: u16 = 1;

pub fn write_snapshot<'a, W, I>(w: &mut W, entries: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, &'a Tensor)>,
{
    let entries: Vec<_> = entries.into_iter().collect();
    let mut buf = Vec::new();
    buf.extend_from_slice(&SNAPSHOT_MAGIC);
    buf.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (name, t) in entries {
        let name_len = u16::try_from(name.len())
            .map_err(|_| TensorError::InvalidEntry(format!("name too long: {name}")))?;
        let rank = u8::try_from(t.rank())
            .map_err(|_| TensorError::InvalidEntry(format!("rank too large: {name}")))?;
        if !t.is_finite() {
            return Err(TensorError::NonFinite("write_snapshot"));
        }
        buf.extend_from_slice(&name_len.to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(rank);
        for &d in t.shape() {
            let d = u32::try_from(d)
                .map_err(|_| TensorError::InvalidEntry(format!("dim too large: {name}")))?;
            buf.extend_from_slice(&d.to_le_bytes());
        }
        for &v in t.data() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(TensorError::Truncated(what))?;
        let s = self.bytes.get(self.pos..end).ok_or(TensorError::Truncated(what))?;
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self, what: &'static str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn read_snapshot<R: Read>(r: &mut R) -> Result<Vec<(String, Tensor)>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    let magic: [u8; 4] = c.take(4, "magic")?.try_into().unwrap();
    if magic != SNAPSHOT_MAGIC {
        return Err(TensorError::BadMagic(magic));
    }
    let version = c.u16("version")?;
    if version != SNAPSHOT_VERSION {
        return Err(TensorError::UnsupportedVersion(version));
    }
    let count = c.u32("count")?;
    let mut out = Vec::new();
    for _ in 0..count {
        let name_len = c.u16("name length")? as usize;
        let name = std::str::from_utf8(c.take(name_len, "name")?)
            .map_err(|e| TensorError::InvalidEntry(e.to_string()))?
            .to_string();
        let rank = c.take(1, "rank")?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(c.u32("dims")? as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(4).map(|_| n))
            .ok_or_else(|| TensorError::InvalidEntry(format!("{name}: dims overflow")))?;
        let payload = c.take(n * 4, "payload")?;
        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        out.push((name, Tensor::new(shape, data)?));
    }
    if c.pos != bytes.len() {
        return Err(TensorError::InvalidEntry(format!(
            "{} trailing bytes",
            bytes.len() - c.pos
        )));
    }
    Ok(out)
}

impl ParamStore {
    pub fn write_snapshot<W: Write>(&self, w: &mut W) -> Result<()> {
        write_snapshot(w, self.iter())
    }

    pub fn read_snapshot<R: Read>(&mut self, r: &mut R) -> Result<()> {
        self.load_named(read_snapshot(r)?)
    }
}
