//! Binary tensor files.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size      | field                                   |
//! |--------|-----------|-----------------------------------------|
//! | 0      | 4         | magic `AWCT`                            |
//! | 4      | 1         | version, `1`                            |
//! | 5      | 1         | dtype, `0` = IEEE-754 binary32          |
//! | 6      | 1         | rank, 1..=3                             |
//! | 7      | 1         | padding, `0`                            |
//! | 8      | 4 * rank  | dims as `u32`                           |
//! | ...    | 4 * prod  | payload, row-major, last dim fastest    |
//!
//! Rank 3 holds a `(C, H, W)` activation map, rank 2 a matrix and rank 1 a
//! vector. The file length must match the header exactly.

use std::fs;
use std::path::Path;

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"AWCT";
pub const VERSION: u8 = 1;
pub const DTYPE_F32: u8 = 0;
const FIXED_HEADER: usize = 8;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("file too short for header ({0} bytes)")]
    Truncated(usize),
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("unsupported dtype {0}")]
    BadDtype(u8),
    #[error("unsupported rank {0}")]
    BadRank(u8),
    #[error("nonzero padding byte {0}")]
    BadPadding(u8),
    #[error("payload is {actual} bytes but the header declares {expected}")]
    PayloadLength { expected: usize, actual: usize },
    #[error("tensor rank {0} is outside 1..=3")]
    UnsupportedShape(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl TensorFile {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self, FormatError> {
        if !(1..=3).contains(&dims.len()) {
            return Err(FormatError::UnsupportedShape(dims.len()));
        }
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(FormatError::PayloadLength {
                expected: expected * 4,
                actual: data.len() * 4,
            });
        }
        Ok(Self { dims, data })
    }

    /// Narrows `f64` values to `f32`.
    pub fn from_f64(dims: Vec<usize>, data: &[f64]) -> Result<Self, FormatError> {
        Self::new(dims, data.iter().map(|&v| v as f32).collect())
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FIXED_HEADER + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&[VERSION, DTYPE_F32, self.dims.len() as u8, 0]);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        if bytes.len() < FIXED_HEADER {
            return Err(FormatError::Truncated(bytes.len()));
        }
        let magic = [bytes[0], bytes[1], bytes[2], bytes[3]];
        if magic != MAGIC {
            return Err(FormatError::BadMagic(magic));
        }
        if bytes[4] != VERSION {
            return Err(FormatError::BadVersion(bytes[4]));
        }
        if bytes[5] != DTYPE_F32 {
            return Err(FormatError::BadDtype(bytes[5]));
        }
        let rank = bytes[6];
        if !(1..=3).contains(&rank) {
            return Err(FormatError::BadRank(rank));
        }
        if bytes[7] != 0 {
            return Err(FormatError::BadPadding(bytes[7]));
        }
        let header = FIXED_HEADER + 4 * rank as usize;
        if bytes.len() < header {
            return Err(FormatError::Truncated(bytes.len()));
        }
        let dims: Vec<usize> = bytes[FIXED_HEADER..header]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
            .collect();
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(4));
        let payload = bytes.len() - header;
        match count {
            Some(expected) if expected == payload => {}
            expected => {
                return Err(FormatError::PayloadLength {
                    expected: expected.unwrap_or(usize::MAX),
                    actual: payload,
                })
            }
        }
        let data = bytes[header..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Self { dims, data })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, FormatError> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), FormatError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }
}
