//! Binary feature-file interchange format.
//!
//! Little-endian layout:
//!
//! | bytes | field                                         |
//! |-------|-----------------------------------------------|
//! | 8     | magic `MDVQFEAT`                              |
//! | 4     | version (`u32`, currently 1)                  |
//! | 1     | kind (`0` semantic, `1` distortion, `2` motion) |
//! | 3     | zero padding                                  |
//! | 4     | row count (`u32`)                             |
//! | 4     | row width (`u32`)                             |
//! | 4·n   | `count * dim` `f32` values, row-major         |

use std::path::Path;

use super::FeatureError;

pub const MAGIC: &[u8; 8] = b"MDVQFEAT";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Semantic = 0,
    Distortion = 1,
    Motion = 2,
}

impl TryFrom<u8> for FeatureKind {
    type Error = FeatureError;

    fn try_from(v: u8) -> Result<Self, FeatureError> {
        match v {
            0 => Ok(Self::Semantic),
            1 => Ok(Self::Distortion),
            2 => Ok(Self::Motion),
            other => Err(FeatureError::BadKind(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub kind: FeatureKind,
    pub count: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl FeatureFile {
    pub fn new(kind: FeatureKind, count: usize, dim: usize, data: Vec<f32>) -> Result<Self, FeatureError> {
        if data.len() != count * dim {
            return Err(FeatureError::LengthMismatch {
                expected: count * dim * 4,
                found: data.len() * 4,
            });
        }
        if u32::try_from(count).is_err() || u32::try_from(dim).is_err() {
            return Err(FeatureError::Shape(format!("{count}x{dim} exceeds u32 header fields")));
        }
        Ok(Self { kind, count, dim, data })
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&[0; 3]);
        out.extend_from_slice(&(self.count as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FeatureError> {
        if bytes.len() < MAGIC.len() || &bytes[..8] != MAGIC {
            return Err(FeatureError::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(FeatureError::LengthMismatch {
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u32_at(8);
        if version != VERSION {
            return Err(FeatureError::VersionMismatch(version));
        }
        let kind = FeatureKind::try_from(bytes[12])?;
        let count = u32_at(16) as usize;
        let dim = u32_at(20) as usize;
        let payload = &bytes[HEADER_LEN..];
        let expected = count
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(4))
            .ok_or(FeatureError::LengthMismatch {
                expected: usize::MAX,
                found: payload.len(),
            })?;
        if payload.len() != expected {
            return Err(FeatureError::LengthMismatch {
                expected,
                found: payload.len(),
            });
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { kind, count, dim, data })
    }
}

/// Write a row-major `count x dim` matrix. Non-finite values are rejected.
pub fn write_feature_file(
    path: impl AsRef<Path>,
    kind: FeatureKind,
    count: usize,
    dim: usize,
    data: &[f32],
) -> Result<(), FeatureError> {
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite {
            row: i / dim.max(1),
            col: i % dim.max(1),
        });
    }
    let file = FeatureFile::new(kind, count, dim, data.to_vec())?;
    std::fs::write(path, file.to_bytes())?;
    Ok(())
}

pub fn read_feature_file(path: impl AsRef<Path>) -> Result<FeatureFile, FeatureError> {
    let path = path.as_ref();
    let wrap = |e: FeatureError| FeatureError::File {
        path: path.display().to_string(),
        source: Box::new(e),
    };
    let bytes = std::fs::read(path).map_err(|e| wrap(e.into()))?;
    FeatureFile::from_bytes(&bytes).map_err(wrap)
}
