//! GPS1 binary field files.
//!
//! Layout: magic `GPS1`, dimension (i32), points per axis (i32), four
//! reserved zero bytes, spacing (f64), then the samples as little-endian
//! f64 in row-major order. Complex fields store interleaved (re, im)
//! pairs under the same header; the payload length tells them apart.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GPS1";
pub const HEADER_LEN: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridHeader {
    pub dim: usize,
    pub n: usize,
    pub spacing: f64,
}

impl GridHeader {
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dim as i32).to_le_bytes());
        out.extend_from_slice(&(self.n as i32).to_le_bytes());
        out.extend_from_slice(&[0u8; 4]);
        out.extend_from_slice(&self.spacing.to_le_bytes());
        out
    }

    fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[0..4] != MAGIC {
            return Err(Error::invalid("not a GPS1 file (bad magic or short header)"));
        }
        let dim = i32::from_le_bytes(bytes[4..8].try_into().unwrap());
        let n = i32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let spacing = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
        if dim <= 0 || n <= 0 || !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::invalid(format!(
                "GPS1 header out of range: dim={dim}, n={n}, spacing={spacing}"
            )));
        }
        Ok(GridHeader {
            dim: dim as usize,
            n: n as usize,
            spacing,
        })
    }
}

fn encode_f64s(header: &GridHeader, values: impl Iterator<Item = f64>) -> Vec<u8> {
    let mut out = header.encode();
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn check_len(header: &GridHeader, got: usize) -> Result<()> {
    if got != header.len() {
        return Err(Error::DimensionMismatch {
            expected: header.len(),
            got,
        });
    }
    Ok(())
}

pub fn write_real(path: impl AsRef<Path>, header: &GridHeader, data: &[f64]) -> Result<()> {
    check_len(header, data.len())?;
    let bytes = encode_f64s(header, data.iter().copied());
    fs::write(path.as_ref(), bytes).map_err(|e| Error::io(path.as_ref(), e))
}

pub fn write_complex(path: impl AsRef<Path>, header: &GridHeader, data: &[Complex64]) -> Result<()> {
    check_len(header, data.len())?;
    let bytes = encode_f64s(header, data.iter().flat_map(|z| [z.re, z.im]));
    fs::write(path.as_ref(), bytes).map_err(|e| Error::io(path.as_ref(), e))
}

fn read_payload(path: &Path) -> Result<(GridHeader, Vec<f64>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = GridHeader::decode(&bytes)?;
    let body = &bytes[HEADER_LEN..];
    if body.len() % 8 != 0 {
        return Err(Error::invalid("GPS1 payload is not a whole number of f64 values"));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, values))
}

pub fn read_real(path: impl AsRef<Path>) -> Result<(GridHeader, Vec<f64>)> {
    let (header, values) = read_payload(path.as_ref())?;
    check_len(&header, values.len())?;
    Ok((header, values))
}

pub fn read_complex(path: impl AsRef<Path>) -> Result<(GridHeader, Vec<Complex64>)> {
    let (header, values) = read_payload(path.as_ref())?;
    check_len(&header, values.len() / 2)?;
    if values.len() % 2 != 0 {
        return Err(Error::invalid("complex GPS1 payload has odd length"));
    }
    let data = values
        .chunks_exact(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect();
    Ok((header, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.gps1");
        let header = GridHeader { dim: 3, n: 4, spacing: 0.25 };
        let data: Vec<f64> = (0..64).map(|i| i as f64 * 0.5 - 3.0).collect();
        write_real(&path, &header, &data).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 64 * 8);
        assert_eq!(&bytes[..4], b"GPS1");
        let (h2, d2) = read_real(&path).unwrap();
        assert_eq!(h2, header);
        assert_eq!(d2, data);
    }

    #[test]
    fn complex_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.gps1");
        let header = GridHeader { dim: 3, n: 2, spacing: 1.0 };
        let data: Vec<Complex64> = (0..8).map(|i| Complex64::new(i as f64, -(i as f64))).collect();
        write_complex(&path, &header, &data).unwrap();
        let (_, d2) = read_complex(&path).unwrap();
        assert_eq!(d2, data);
        assert!(read_real(&path).is_err());
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad");
        fs::write(&path, [0u8; 40]).unwrap();
        assert!(read_real(&path).is_err());
    }
}
