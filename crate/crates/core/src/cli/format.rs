//! Binary tensor and Tucker files.
//!
//! Both formats are little-endian. A tensor file is
//! `"RTEN" | 0x01 | d | d × u64 dims | f64 payload (column-major)`; a Tucker
//! file is `"RTUK" | 0x01 | d | d × u64 core dims | d × u64 dims | core |
//! factor 0 | … | factor d−1`, every payload column-major.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Matrix, TuckerDecomposition};

pub const TENSOR_MAGIC: &[u8; 4] = b"RTEN";
pub const TUCKER_MAGIC: &[u8; 4] = b"RTUK";
pub const VERSION: u8 = 1;

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn eof_as_format(e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        format_err("file is truncated")
    } else {
        Error::Io(e)
    }
}

/// Size in bytes of a tensor file with the given dims.
pub fn tensor_file_len(dims: &[usize]) -> usize {
    6 + 8 * dims.len() + 8 * dims.iter().product::<usize>()
}

fn write_header<W: Write>(w: &mut W, magic: &[u8; 4], order: usize) -> Result<()> {
    let d = u8::try_from(order).map_err(|_| format_err(format!("order {order} exceeds 255")))?;
    w.write_all(magic)?;
    w.write_all(&[VERSION, d])?;
    Ok(())
}

fn write_dims<W: Write>(w: &mut W, dims: &[usize]) -> Result<()> {
    for &n in dims {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    Ok(())
}

fn write_values<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads magic, version and order; returns the order.
fn read_header<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<usize> {
    let mut head = [0u8; 6];
    r.read_exact(&mut head).map_err(eof_as_format)?;
    if &head[..4] != magic {
        return Err(format_err(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&head[..4])
        )));
    }
    if head[4] != VERSION {
        return Err(format_err(format!("unsupported version {}", head[4])));
    }
    if head[5] == 0 {
        return Err(format_err("order must be at least 1"));
    }
    Ok(head[5] as usize)
}

fn read_dims<R: Read>(r: &mut R, d: usize) -> Result<Vec<usize>> {
    let mut dims = Vec::with_capacity(d);
    let mut buf = [0u8; 8];
    for _ in 0..d {
        r.read_exact(&mut buf).map_err(eof_as_format)?;
        let n = usize::try_from(u64::from_le_bytes(buf))
            .map_err(|_| format_err("dimension does not fit in memory"))?;
        if n == 0 {
            return Err(format_err("dimensions must be positive"));
        }
        dims.push(n);
    }
    checked_len(&dims)?;
    Ok(dims)
}

fn checked_len(dims: &[usize]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .filter(|len| len.checked_mul(8).is_some())
        .ok_or_else(|| format_err(format!("dims {:?} overflow", dims)))
}

fn read_values<R: Read>(r: &mut R, len: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; len * 8];
    r.read_exact(&mut bytes).map_err(eof_as_format)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

fn expect_end<R: Read>(r: &mut R) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(format_err("trailing bytes after payload")),
    }
}

pub fn write_tensor<W: Write>(w: &mut W, t: &DenseTensor) -> Result<()> {
    write_header(w, TENSOR_MAGIC, t.order())?;
    write_dims(w, t.dims())?;
    write_values(w, t.data())
}

pub fn read_tensor<R: Read>(r: &mut R) -> Result<DenseTensor> {
    let d = read_header(r, TENSOR_MAGIC)?;
    let dims = read_dims(r, d)?;
    let data = read_values(r, checked_len(&dims)?)?;
    expect_end(r)?;
    DenseTensor::new(dims, data)
}

pub fn write_tucker<W: Write>(w: &mut W, dec: &TuckerDecomposition) -> Result<()> {
    write_header(w, TUCKER_MAGIC, dec.core.order())?;
    write_dims(w, dec.core.dims())?;
    write_dims(w, &dec.dims())?;
    write_values(w, dec.core.data())?;
    for f in &dec.factors {
        write_values(w, f.as_slice())?;
    }
    Ok(())
}

/// Reads a Tucker file. The HOSVD flag is not stored, so the result is
/// marked as a plain Tucker decomposition.
pub fn read_tucker<R: Read>(r: &mut R) -> Result<TuckerDecomposition> {
    let d = read_header(r, TUCKER_MAGIC)?;
    let ranks = read_dims(r, d)?;
    let dims = read_dims(r, d)?;
    let core = DenseTensor::new(ranks.clone(), read_values(r, checked_len(&ranks)?)?)?;
    let factors = dims
        .iter()
        .zip(&ranks)
        .map(|(&n, &k)| {
            let len = n
                .checked_mul(k)
                .ok_or_else(|| format_err("factor size overflows"))?;
            Ok(Matrix::from_vec(n, k, read_values(r, len)?))
        })
        .collect::<Result<Vec<_>>>()?;
    expect_end(r)?;
    TuckerDecomposition::new(core, factors, false)
}

pub fn save_tensor(path: &Path, t: &DenseTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(&mut w, t)?;
    w.flush()?;
    Ok(())
}

pub fn load_tensor(path: &Path) -> Result<DenseTensor> {
    read_tensor(&mut BufReader::new(File::open(path)?))
}

pub fn save_tucker(path: &Path, dec: &TuckerDecomposition) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tucker(&mut w, dec)?;
    w.flush()?;
    Ok(())
}

pub fn load_tucker(path: &Path) -> Result<TuckerDecomposition> {
    read_tucker(&mut BufReader::new(File::open(path)?))
}

/// Header of either file kind, read without touching the payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FileHeader {
    Tensor { dims: Vec<usize> },
    Tucker { ranks: Vec<usize>, dims: Vec<usize> },
}

impl FileHeader {
    /// Total file size implied by the header.
    pub fn expected_len(&self) -> usize {
        match self {
            FileHeader::Tensor { dims } => tensor_file_len(dims),
            FileHeader::Tucker { ranks, dims } => {
                6 + 16 * dims.len()
                    + 8 * ranks.iter().product::<usize>()
                    + 8 * dims.iter().zip(ranks).map(|(n, r)| n * r).sum::<usize>()
            }
        }
    }
}

/// Reads the header of a tensor or Tucker file and checks the file size.
pub fn read_file_header(path: &Path) -> Result<FileHeader> {
    let file = File::open(path)?;
    let actual = file.metadata()?.len();
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(eof_as_format)?;
    let mut rest = magic.as_slice().chain(r);
    let header = if &magic == TENSOR_MAGIC {
        let d = read_header(&mut rest, TENSOR_MAGIC)?;
        FileHeader::Tensor {
            dims: read_dims(&mut rest, d)?,
        }
    } else if &magic == TUCKER_MAGIC {
        let d = read_header(&mut rest, TUCKER_MAGIC)?;
        let ranks = read_dims(&mut rest, d)?;
        FileHeader::Tucker {
            ranks,
            dims: read_dims(&mut rest, d)?,
        }
    } else {
        return Err(format_err(format!(
            "unknown magic {:?}",
            String::from_utf8_lossy(&magic)
        )));
    };
    if header.expected_len() as u64 != actual {
        return Err(format_err(format!(
            "header implies {} bytes, file has {actual}",
            header.expected_len()
        )));
    }
    Ok(header)
}

/// Element type of a raw dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawType {
    F32,
    F64,
}

/// Byte order of a raw dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endian {
    Little,
    Big,
}

/// Decodes a headerless column-major dump into a tensor. `f32` values are
/// widened exactly.
pub fn decode_raw(
    bytes: &[u8],
    dtype: RawType,
    dims: &[usize],
    endian: Endian,
) -> Result<DenseTensor> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "dims must be nonempty and positive, got {:?}",
            dims
        )));
    }
    let len = checked_len(dims)?;
    let width = match dtype {
        RawType::F32 => 4,
        RawType::F64 => 8,
    };
    if bytes.len() != len * width {
        return Err(format_err(format!(
            "dims {:?} need {} bytes of {:?}, input has {}",
            dims,
            len * width,
            dtype,
            bytes.len()
        )));
    }
    let data = match (dtype, endian) {
        (RawType::F32, Endian::Little) => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect(),
        (RawType::F32, Endian::Big) => bytes
            .chunks_exact(4)
            .map(|c| f32::from_be_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect(),
        (RawType::F64, Endian::Little) => bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect(),
        (RawType::F64, Endian::Big) => bytes
            .chunks_exact(8)
            .map(|c| f64::from_be_bytes(c.try_into().expect("8 bytes")))
            .collect(),
    };
    DenseTensor::new(dims.to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DenseTensor {
        DenseTensor::from_fn(vec![4, 5, 6], |i| {
            (i[0] as f64).sin() + 1e-300 * i[1] as f64 - (i[2] as f64).powi(7)
        })
        .unwrap()
    }

    #[test]
    fn tensor_round_trip_is_bitwise() {
        let t = sample();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        assert_eq!(buf.len(), tensor_file_len(t.dims()));
        assert_eq!(&buf[..6], b"RTEN\x01\x03");
        let back = read_tensor(&mut buf.as_slice()).unwrap();
        assert_eq!(back.dims(), t.dims());
        assert!(back
            .data()
            .iter()
            .zip(t.data())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn runge_size_arithmetic() {
        assert_eq!(tensor_file_len(&[20, 20, 20]), 8 * 8000 + 6 + 24);
    }

    #[test]
    fn tucker_round_trip() {
        let core = DenseTensor::from_fn(vec![2, 3, 1], |i| i[0] as f64 - i[1] as f64).unwrap();
        let factors = vec![
            Matrix::from_fn(4, 2, |i, j| (i * 2 + j) as f64),
            Matrix::from_fn(2, 3, |i, j| (i + j) as f64 * 0.5),
            Matrix::from_fn(3, 1, |i, _| i as f64),
        ];
        let dec = TuckerDecomposition::new(core, factors, true).unwrap();
        let mut buf = Vec::new();
        write_tucker(&mut buf, &dec).unwrap();
        let back = read_tucker(&mut buf.as_slice()).unwrap();
        assert_eq!(back.core, dec.core);
        assert_eq!(back.factors, dec.factors);
        let header = FileHeader::Tucker {
            ranks: vec![2, 3, 1],
            dims: vec![4, 2, 3],
        };
        assert_eq!(header.expected_len(), buf.len());
    }

    #[test]
    fn malformed_inputs() {
        let mut buf = Vec::new();
        write_tensor(&mut buf, &sample()).unwrap();
        let bad = |bytes: &[u8]| matches!(read_tensor(&mut &bytes[..]), Err(Error::Format(_)));
        assert!(bad(&buf[..buf.len() - 1]));
        let mut extra = buf.clone();
        extra.push(0);
        assert!(bad(&extra));
        let mut magic = buf.clone();
        magic[0] = b'X';
        assert!(bad(&magic));
        let mut version = buf.clone();
        version[4] = 2;
        assert!(bad(&version));
        let mut zero_dim = buf.clone();
        zero_dim[6..14].copy_from_slice(&0u64.to_le_bytes());
        assert!(bad(&zero_dim));
        assert!(bad(b"RT"));
        assert!(matches!(
            read_tucker(&mut buf.as_slice()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn raw_decoding() {
        let vals = [1.5f32, -2.25, 3.0e-8, 7.0];
        let le: Vec<u8> = vals.iter().flat_map(|v| v.to_le_bytes()).collect();
        let be: Vec<u8> = vals.iter().flat_map(|v| v.to_be_bytes()).collect();
        let a = decode_raw(&le, RawType::F32, &[2, 2], Endian::Little).unwrap();
        let b = decode_raw(&be, RawType::F32, &[2, 2], Endian::Big).unwrap();
        assert_eq!(a, b);
        assert!(a.data().iter().zip(vals).all(|(x, v)| *x == v as f64));
        assert!(matches!(
            decode_raw(&le, RawType::F32, &[3, 2], Endian::Little),
            Err(Error::Format(_))
        ));
        let d: Vec<u8> = [0.1f64, 0.2].iter().flat_map(|v| v.to_be_bytes()).collect();
        let t = decode_raw(&d, RawType::F64, &[2], Endian::Big).unwrap();
        assert_eq!(t.data(), &[0.1, 0.2]);
    }
}
