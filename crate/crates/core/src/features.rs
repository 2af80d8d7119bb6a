//! Dense per-utterance feature matrices and the `FVEC` file format.
//!
//! Layout (little-endian, no padding, no footer):
//!
//! | bytes | field                          |
//! |-------|--------------------------------|
//! | 4     | magic `b"FVEC"`                |
//! | 4     | format version, `u32` = 1      |
//! | 8     | rows, `u64`                    |
//! | 4     | dim, `u32`                     |
//! | 4·r·d | `f32` values, row-major        |
//!
//! Row `i` belongs to manifest record `i`.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"FVEC";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("cannot access feature file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("bad magic bytes {found:?}, expected \"FVEC\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("feature dimension must be positive")]
    ZeroDim,
    #[error("truncated file: header declares {expected} values, payload holds {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("truncated header: {0} of 20 bytes")]
    TruncatedHeader(usize),
    #[error("unexpected trailing bytes after {expected} values")]
    TrailingBytes { expected: u64 },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("row {row} has zero norm and cannot be normalized")]
    ZeroNorm { row: usize },
    #[error("row count mismatch: part 0 has {expected} rows, part {part} has {found}")]
    RowMismatch {
        part: usize,
        expected: usize,
        found: usize,
    },
    #[error("data length {len} is not rows ({rows}) x dim ({dim})")]
    Shape { rows: usize, dim: usize, len: usize },
    #[error("nothing to concatenate")]
    NoParts,
}

/// Row-major matrix of `f32` feature vectors, one row per utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self, FeatureError> {
        if dim == 0 {
            return Err(FeatureError::ZeroDim);
        }
        if rows.checked_mul(dim) != Some(data.len()) {
            return Err(FeatureError::Shape {
                rows,
                dim,
                len: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(FeatureMatrix { rows, dim, data })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self, FeatureError> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(FeatureError::Shape {
                    rows: rows.len(),
                    dim,
                    len: data.len() + row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        FeatureMatrix::new(rows.len(), dim, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim)
    }

    /// Multiplies every value by `factor`.
    pub fn scaled(&self, factor: f32) -> FeatureMatrix {
        FeatureMatrix {
            rows: self.rows,
            dim: self.dim,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Reads an `FVEC` file, rejecting NaN and infinite values.
pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureMatrix, FeatureError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| FeatureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_features(BufReader::new(file)).map_err(|e| match e {
        FeatureError::Io { source, .. } => FeatureError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Header fields of an `FVEC` stream: `(rows, dim)`.
pub fn read_header<R: Read>(reader: &mut R) -> Result<(u64, u32), FeatureError> {
    let mut header = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        match reader.read(&mut header[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(source) => return Err(io_error(source)),
        }
    }
    if filled < 4 || &header[..4] != MAGIC {
        let mut found = [0u8; 4];
        found[..filled.min(4)].copy_from_slice(&header[..filled.min(4)]);
        return Err(FeatureError::BadMagic { found });
    }
    if filled < HEADER_LEN {
        return Err(FeatureError::TruncatedHeader(filled));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(FeatureError::UnsupportedVersion(version));
    }
    let rows = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let dim = u32::from_le_bytes(header[16..20].try_into().unwrap());
    if dim == 0 {
        return Err(FeatureError::ZeroDim);
    }
    Ok((rows, dim))
}

pub fn read_features<R: Read>(mut reader: R) -> Result<FeatureMatrix, FeatureError> {
    let (rows, dim) = read_header(&mut reader)?;
    let expected = rows
        .checked_mul(dim as u64)
        .ok_or(FeatureError::Truncated {
            expected: u64::MAX,
            found: 0,
        })?;
    let expected_bytes = expected
        .checked_mul(4)
        .ok_or(FeatureError::Truncated { expected, found: 0 })?;

    // Read at most the declared payload plus one probe byte, without trusting
    // the header for a single huge allocation.
    let mut payload = Vec::new();
    (&mut reader)
        .take(expected_bytes.saturating_add(1))
        .read_to_end(&mut payload)
        .map_err(io_error)?;
    if (payload.len() as u64) < expected_bytes {
        return Err(FeatureError::Truncated {
            expected,
            found: payload.len() as u64 / 4,
        });
    }
    if (payload.len() as u64) > expected_bytes {
        return Err(FeatureError::TrailingBytes { expected });
    }

    let rows = rows as usize;
    let dim = dim as usize;
    let mut data = Vec::with_capacity(rows * dim);
    for (k, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(FeatureError::NonFinite {
                row: k / dim,
                col: k % dim,
            });
        }
        data.push(v);
    }
    Ok(FeatureMatrix { rows, dim, data })
}

pub fn write_features(matrix: &FeatureMatrix, path: impl AsRef<Path>) -> Result<(), FeatureError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| FeatureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = BufWriter::new(file);
    write_features_to(matrix, &mut out)
        .and_then(|_| out.flush())
        .map_err(|source| FeatureError::Io {
            path: path.to_path_buf(),
            source,
        })
}

pub fn write_features_to<W: Write>(matrix: &FeatureMatrix, out: &mut W) -> io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(matrix.rows as u64).to_le_bytes())?;
    out.write_all(&(matrix.dim as u32).to_le_bytes())?;
    for v in &matrix.data {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn io_error(source: io::Error) -> FeatureError {
    FeatureError::Io {
        path: PathBuf::new(),
        source,
    }
}

/// Scales every row to unit Euclidean norm. Norms are computed in `f64`.
pub fn normalize_rows(m: &FeatureMatrix) -> Result<FeatureMatrix, FeatureError> {
    let mut data = Vec::with_capacity(m.data.len());
    for (row, values) in m.iter_rows().enumerate() {
        let norm = values
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            return Err(FeatureError::ZeroNorm { row });
        }
        data.extend(values.iter().map(|&v| (f64::from(v) / norm) as f32));
    }
    Ok(FeatureMatrix {
        rows: m.rows,
        dim: m.dim,
        data,
    })
}

/// Joins parts column-wise: row `i` of the result is row `i` of each part,
/// in list order. The result is not re-normalized.
pub fn concat_features(parts: &[&FeatureMatrix]) -> Result<FeatureMatrix, FeatureError> {
    let first = parts.first().ok_or(FeatureError::NoParts)?;
    for (part, m) in parts.iter().enumerate() {
        if m.rows != first.rows {
            return Err(FeatureError::RowMismatch {
                part,
                expected: first.rows,
                found: m.rows,
            });
        }
    }
    let dim: usize = parts.iter().map(|m| m.dim).sum();
    let mut data = Vec::with_capacity(first.rows * dim);
    for i in 0..first.rows {
        for m in parts {
            data.extend_from_slice(m.row(i));
        }
    }
    Ok(FeatureMatrix {
        rows: first.rows,
        dim,
        data,
    })
}
