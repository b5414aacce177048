use std::path::Path;

use super::synthetic::Dataset;
use crate::error::{Error, Result};
use crate::numkit::Matrix;

/// Unsigned-byte tensor in IDX layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub payload: Vec<u8>,
}

const TYPE_U8: u8 = 0x08;

impl IdxTensor {
    pub fn new(dims: Vec<usize>, payload: Vec<u8>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if expected != payload.len() {
            return Err(Error::dims(format!(
                "dims {dims:?} need {expected} values, payload has {}",
                payload.len()
            )));
        }
        Ok(IdxTensor { dims, payload })
    }

    pub fn parse(bytes: &[u8], source: &str) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::TruncatedFile {
                expected: 4,
                found: bytes.len(),
            });
        }
        if bytes[0] != 0 || bytes[1] != 0 {
            return Err(Error::BadMagic(source.to_string()));
        }
        if bytes[2] != TYPE_U8 {
            return Err(Error::UnsupportedTypeCode(bytes[2]));
        }
        let d = bytes[3] as usize;
        let header = 4 + 4 * d;
        if bytes.len() < header {
            return Err(Error::TruncatedFile {
                expected: header,
                found: bytes.len(),
            });
        }
        let dims: Vec<usize> = bytes[4..header]
            .chunks_exact(4)
            .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
            .collect();
        let expected = header + dims.iter().product::<usize>();
        if bytes.len() < expected {
            return Err(Error::TruncatedFile {
                expected,
                found: bytes.len(),
            });
        }
        Ok(IdxTensor {
            dims,
            payload: bytes[header..expected].to_vec(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0, 0, TYPE_U8, self.dims.len() as u8];
        for d in &self.dims {
            out.extend_from_slice(&(*d as u32).to_be_bytes());
        }
        out.extend_from_slice(&self.payload);
        out
    }
}

pub fn load_idx(path: impl AsRef<Path>) -> Result<IdxTensor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    IdxTensor::parse(&bytes, &path.display().to_string())
}

pub fn write_idx(path: impl AsRef<Path>, tensor: &IdxTensor) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, tensor.to_bytes()).map_err(|e| Error::io(path, e))
}

/// Flattens the first `max_m` images (row-major pixels scaled by 1/255) into
/// signal columns and measures them with `A`.
pub fn mnist_dataset(images: &IdxTensor, a: &Matrix, max_m: usize) -> Result<Dataset> {
    if images.dims.len() != 3 {
        return Err(Error::dims(format!(
            "expected [m, rows, cols] images, got dims {:?}",
            images.dims
        )));
    }
    let pixels = images.dims[1] * images.dims[2];
    if a.cols() != pixels {
        return Err(Error::dims(format!(
            "A has {} columns, images have {pixels} pixels",
            a.cols()
        )));
    }
    let m = images.dims[0].min(max_m);
    let x = Matrix::from_fn(pixels, m, |p, i| images.payload[i * pixels + p] as f64 / 255.0);
    Dataset::new(a.clone(), x, None)
}
