//! Binary container for one video's per-frame features.
//!
//! Layout: `V2CF`, `n_frames: u32`, `dim: u32`, then `n_frames * dim`
//! little-endian `f32` values in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;
use v2c_tensor::Tensor;

pub const FEATURE_MAGIC: [u8; 4] = *b"V2CF";

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("bad feature file magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("feature file truncated: expected {expected} payload bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("feature header truncated")]
    TruncatedHeader,
    #[error("feature dimensions {n_frames}x{dim} overflow")]
    DimOverflow { n_frames: u32, dim: u32 },
    #[error("feature matrix must have at least one frame and one dimension, got {n_frames}x{dim}")]
    Empty { n_frames: u32, dim: u32 },
    #[error("feature file has {0} trailing bytes")]
    TrailingBytes(u64),
    #[error("non-finite feature value at frame {frame}, dim {dim}")]
    NonFinite { frame: usize, dim: usize },
    #[error("feature data length {len} does not match {n_frames}x{dim}")]
    Shape { n_frames: usize, dim: usize, len: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An `n_frames x dim` matrix of frame features.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoFeatures {
    pub video_id: String,
    n_frames: usize,
    dim: usize,
    data: Vec<f32>,
}

impl VideoFeatures {
    pub fn new(
        video_id: impl Into<String>,
        n_frames: usize,
        dim: usize,
        data: Vec<f32>,
    ) -> Result<Self, FeatureError> {
        if n_frames == 0 || dim == 0 {
            return Err(FeatureError::Empty {
                n_frames: n_frames as u32,
                dim: dim as u32,
            });
        }
        if n_frames.checked_mul(dim) != Some(data.len()) {
            return Err(FeatureError::Shape {
                n_frames,
                dim,
                len: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(FeatureError::NonFinite {
                frame: i / dim,
                dim: i % dim,
            });
        }
        Ok(Self {
            video_id: video_id.into(),
            n_frames,
            dim,
            data,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn to_tensor(&self) -> Tensor {
        let data = self.data.iter().map(|&x| x as f64).collect();
        Tensor::new(vec![self.n_frames, self.dim], data).expect("validated shape")
    }

    /// Mean over frames.
    pub fn mean_frame(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for t in 0..self.n_frames {
            for (a, &x) in m.iter_mut().zip(self.frame(t)) {
                *a += x as f64;
            }
        }
        m.iter_mut().for_each(|a| *a /= self.n_frames as f64);
        m
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<(), FeatureError> {
        w.write_all(&FEATURE_MAGIC)?;
        w.write_all(&(self.n_frames as u32).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        for x in &self.data {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R, video_id: impl Into<String>) -> Result<Self, FeatureError> {
        let mut header = [0u8; 12];
        read_full(r, &mut header).and_then(|n| {
            if n < header.len() {
                Err(FeatureError::TruncatedHeader)
            } else {
                Ok(())
            }
        })?;
        let magic: [u8; 4] = header[..4].try_into().expect("4 bytes");
        if magic != FEATURE_MAGIC {
            return Err(FeatureError::BadMagic(magic));
        }
        let n_frames = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes"));
        let dim = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes"));
        if n_frames == 0 || dim == 0 {
            return Err(FeatureError::Empty { n_frames, dim });
        }
        let expected = (n_frames as u64)
            .checked_mul(dim as u64)
            .and_then(|n| n.checked_mul(4))
            .filter(|&n| usize::try_from(n).is_ok())
            .ok_or(FeatureError::DimOverflow { n_frames, dim })?;
        let mut payload = Vec::new();
        let found = r.take(expected).read_to_end(&mut payload)? as u64;
        if found < expected {
            return Err(FeatureError::Truncated { expected, found });
        }
        let mut rest = Vec::new();
        let extra = r.read_to_end(&mut rest)? as u64;
        if extra > 0 {
            return Err(FeatureError::TrailingBytes(extra));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Self::new(video_id, n_frames as usize, dim as usize, data)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FeatureError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, video_id: impl Into<String>) -> Result<Self, FeatureError> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read(&mut r, video_id)
    }
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize, FeatureError> {
    let mut n = 0;
    while n < buf.len() {
        match r.read(&mut buf[n..])? {
            0 => break,
            k => n += k,
        }
    }
    Ok(n)
}
