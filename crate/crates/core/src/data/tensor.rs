//! PTRN binary tensor container with a headerless CSV fallback.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size  | field                          |
//! |--------|-------|--------------------------------|
//! | 0      | 4     | magic `PTRN`                   |
//! | 4      | 4     | version, u32 = 1               |
//! | 8      | 1     | dtype: 0 = float32, 1 = int32  |
//! | 9      | 1     | rank                           |
//! | 10     | 8·r   | dims, u64 each                 |
//! | …      | 4·∏d  | row-major payload              |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::Matrix;

pub const MAGIC: &[u8; 4] = b"PTRN";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    I32(Vec<i32>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: TensorData,
}

impl Tensor {
    pub fn from_matrix(m: &Matrix) -> Self {
        let (r, c) = m.shape();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)] as f32);
            }
        }
        Tensor {
            shape: vec![r, c],
            data: TensorData::F32(data),
        }
    }

    pub fn from_labels(labels: &[usize]) -> Self {
        Tensor {
            shape: vec![labels.len()],
            data: TensorData::I32(labels.iter().map(|&y| y as i32).collect()),
        }
    }

    fn values(&self) -> Vec<f64> {
        match &self.data {
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::I32(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }

    /// Rank-2 tensors map directly; rank-1 become a single column; rank-0 a 1×1.
    pub fn to_matrix(&self) -> Result<Matrix> {
        let (r, c) = match self.shape.as_slice() {
            [] => (1, 1),
            [n] => (*n, 1),
            [r, c] => (*r, *c),
            s => return Err(Error::validation(format!("expected a matrix, got rank {}", s.len()))),
        };
        let values = self.values();
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("non-finite value at flat index {pos}")));
        }
        Ok(Matrix::from_row_slice(r, c, &values))
    }

    /// Interpret a rank-1 (or N×1) tensor as class indices.
    pub fn to_labels(&self) -> Result<Vec<usize>> {
        matrix_to_labels(&self.to_matrix()?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(10 + 8 * self.shape.len() + 4 * self.shape.iter().product::<usize>());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        match &self.data {
            TensorData::F32(_) => out.push(0),
            TensorData::I32(_) => out.push(1),
        }
        out.push(self.shape.len() as u8);
        for &d in &self.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        match &self.data {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::I32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let truncated = |offset: usize| Error::Format {
            offset: offset as u64,
            message: "truncated file".into(),
        };
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: "bad magic, expected PTRN".into(),
            });
        }
        if bytes.len() < 10 {
            return Err(truncated(bytes.len()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format {
                offset: 4,
                message: format!("unsupported version {version}"),
            });
        }
        let dtype = bytes[8];
        if dtype > 1 {
            return Err(Error::Format {
                offset: 8,
                message: format!("unknown dtype code {dtype}"),
            });
        }
        let rank = bytes[9] as usize;
        let header_end = 10 + 8 * rank;
        if bytes.len() < header_end {
            return Err(truncated(bytes.len()));
        }
        let mut shape = Vec::with_capacity(rank);
        let mut count: usize = 1;
        for k in 0..rank {
            let at = 10 + 8 * k;
            let d = u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
            let d = usize::try_from(d).map_err(|_| Error::Format {
                offset: at as u64,
                message: format!("dimension {d} too large"),
            })?;
            count = count.checked_mul(d).ok_or_else(|| Error::Format {
                offset: at as u64,
                message: "element count overflows".into(),
            })?;
            shape.push(d);
        }
        let payload = &bytes[header_end..];
        let expected = count.checked_mul(4).ok_or_else(|| Error::Format {
            offset: header_end as u64,
            message: "payload size overflows".into(),
        })?;
        if payload.len() < expected {
            return Err(truncated(bytes.len()));
        }
        if payload.len() > expected {
            return Err(Error::Format {
                offset: (header_end + expected) as u64,
                message: "trailing bytes after payload".into(),
            });
        }
        let words = payload.chunks_exact(4).map(|c| <[u8; 4]>::try_from(c).unwrap());
        let data = if dtype == 0 {
            let v: Vec<f32> = words.map(f32::from_le_bytes).collect();
            if let Some(pos) = v.iter().position(|x| x.is_nan()) {
                return Err(Error::validation(format!(
                    "NaN in payload at byte offset {}",
                    header_end + 4 * pos
                )));
            }
            TensorData::F32(v)
        } else {
            TensorData::I32(words.map(i32::from_le_bytes).collect())
        };
        Ok(Tensor { shape, data })
    }
}

fn looks_like_csv(bytes: &[u8]) -> bool {
    bytes.iter().all(|b| b.is_ascii_digit() || b",;.-+eE \t\r\nnNaAiIfF".contains(b))
}

fn parse_csv(bytes: &[u8]) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format {
            offset: e.position().map_or(0, |p| p.byte()),
            message: e.to_string(),
        })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .map(|f| {
                let v: f64 = f
                    .parse()
                    .map_err(|_| Error::validation(format!("row {i}: cannot parse {f:?} as a number")))?;
                if v.is_nan() {
                    return Err(Error::validation(format!("row {i}: NaN value")));
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::validation(format!(
                    "row {i} has {} columns, expected {}",
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    Ok(Matrix::from_row_iterator(rows.len(), cols, rows.into_iter().flatten()))
}

/// Read a PTRN container.
pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Tensor::from_bytes(&bytes)
}

pub fn write_tensor(tensor: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, tensor.to_bytes()).map_err(|e| Error::io(path, e))
}

enum Loaded {
    Ptrn(Tensor),
    Csv(Matrix),
}

fn load_any(path: &Path) -> Result<Loaded> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if !bytes.starts_with(MAGIC) && looks_like_csv(&bytes) {
        parse_csv(&bytes).map(Loaded::Csv)
    } else {
        Tensor::from_bytes(&bytes).map(Loaded::Ptrn)
    }
}

/// Load a matrix from a PTRN or headerless CSV file.
pub fn load_tensor(path: impl AsRef<Path>) -> Result<Matrix> {
    match load_any(path.as_ref())? {
        Loaded::Ptrn(t) => t.to_matrix(),
        Loaded::Csv(m) => Ok(m),
    }
}

/// Load class indices from a PTRN vector or a one-column (or one-row) CSV.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    match load_any(path.as_ref())? {
        Loaded::Ptrn(t) => t.to_labels(),
        Loaded::Csv(m) if m.nrows() == 1 => matrix_to_labels(&m.transpose()),
        Loaded::Csv(m) => matrix_to_labels(&m),
    }
}

fn matrix_to_labels(m: &Matrix) -> Result<Vec<usize>> {
    if m.ncols() > 1 {
        return Err(Error::validation(format!("labels must be a vector, got {}x{}", m.nrows(), m.ncols())));
    }
    m.iter()
        .enumerate()
        .map(|(i, &v)| {
            if v < 0.0 || v.fract() != 0.0 {
                Err(Error::validation(format!("label at row {i} is not a non-negative integer: {v}")))
            } else {
                Ok(v as usize)
            }
        })
        .collect()
}

/// Write a matrix as a float32 rank-2 PTRN file.
pub fn save_tensor(matrix: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    if let Some(pos) = matrix.iter().position(|v| !v.is_finite()) {
        return Err(Error::validation(format!("cannot save non-finite value at column-major index {pos}")));
    }
    write_tensor(&Tensor::from_matrix(matrix), path)
}

/// Write labels as an int32 rank-1 PTRN file.
pub fn save_labels(labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    write_tensor(&Tensor::from_labels(labels), path)
}
