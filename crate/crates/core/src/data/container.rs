//! Flat binary dataset container.
//!
//! Layout: six little-endian `u64` counts (rows and columns of `A`, `X`, `Y`),
//! then the entries of `A`, `X`, `Y` as little-endian `f64`, each matrix in
//! column-major order.

use std::path::Path;

use super::synthetic::Dataset;
use crate::error::{Error, Result};
use crate::numkit::Matrix;

const HEADER_BYTES: usize = 6 * 8;

pub fn encode_dataset(d: &Dataset) -> Vec<u8> {
    let mats = [&d.a, &d.x, &d.y];
    let total: usize = mats.iter().map(|m| m.rows() * m.cols()).sum();
    let mut out = Vec::with_capacity(HEADER_BYTES + 8 * total);
    for m in mats {
        out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    }
    for m in mats {
        for j in 0..m.cols() {
            for i in 0..m.rows() {
                out.extend_from_slice(&m[(i, j)].to_le_bytes());
            }
        }
    }
    out
}

/// Inverse of [`encode_dataset`]; the ground-truth dictionary is not stored.
pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    if bytes.len() < HEADER_BYTES {
        return Err(Error::TruncatedFile {
            expected: HEADER_BYTES,
            found: bytes.len(),
        });
    }
    let count = |k: usize| {
        let mut b = [0u8; 8];
        b.copy_from_slice(&bytes[8 * k..8 * k + 8]);
        u64::from_le_bytes(b) as usize
    };
    let shapes: Vec<(usize, usize)> = (0..3).map(|k| (count(2 * k), count(2 * k + 1))).collect();
    let expected = HEADER_BYTES + 8 * shapes.iter().map(|(r, c)| r * c).sum::<usize>();
    if bytes.len() != expected {
        return Err(Error::TruncatedFile {
            expected,
            found: bytes.len(),
        });
    }
    let mut offset = HEADER_BYTES;
    let mut mats = Vec::with_capacity(3);
    for (rows, cols) in shapes {
        let mut m = Matrix::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                let mut b = [0u8; 8];
                b.copy_from_slice(&bytes[offset..offset + 8]);
                m[(i, j)] = f64::from_le_bytes(b);
                offset += 8;
            }
        }
        mats.push(m);
    }
    let y = mats.pop().unwrap();
    let x = mats.pop().unwrap();
    let a = mats.pop().unwrap();
    if a.rows() != y.rows() || a.cols() != x.rows() || x.cols() != y.cols() {
        return Err(Error::dims(format!(
            "container shapes A {:?}, X {:?}, Y {:?} are inconsistent",
            a.shape(),
            x.shape(),
            y.shape()
        )));
    }
    Ok(Dataset { a, x, y, phi0: None })
}

pub fn write_container(path: impl AsRef<Path>, d: &Dataset) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_dataset(d)).map_err(|e| Error::io(path, e))
}

pub fn read_container(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dataset(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_bitwise() {
        let a = Matrix::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let x = Matrix::from_rows(&[&[0.1], &[-0.0], &[1e-310]]);
        let d = Dataset::new(a, x, None).unwrap();
        let bytes = encode_dataset(&d);
        assert_eq!(bytes.len(), 48 + 8 * (6 + 3 + 2));
        // Column-major: A's second stored value is A[1][0].
        assert_eq!(&bytes[56..64], &4.0f64.to_le_bytes());
        let back = decode_dataset(&bytes).unwrap();
        assert_eq!(encode_dataset(&back), bytes);
        assert!(decode_dataset(&bytes[..bytes.len() - 1]).is_err());
    }
}
