//! Acoustic feature matrices and their on-disk representation.
//!
//! A document's acoustic observations form a dense T×F matrix of f64
//! frames. The native format is binary little-endian (magic, version,
//! dimensions, then row-major payload) so that save → load round-trips
//! are bit-exact; a plain CSV fallback with a `rows,cols` header is
//! accepted on load for hand-written fixtures.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Leading bytes of a binary frame-matrix file.
pub const MATRIX_MAGIC: &[u8; 8] = b"MTXFRAME";
/// Current binary layout version.
pub const MATRIX_VERSION: u64 = 1;

/// One document's frames: T rows of F-dimensional features.
///
/// Invariants (enforced by [`AcousticDocument::new`]): at least one
/// frame, at least one dimension, every value finite.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticDocument {
    pub frames: Array2<f64>,
}

impl AcousticDocument {
    pub fn new(frames: Array2<f64>) -> Result<Self> {
        if frames.nrows() == 0 {
            return Err(Error::Validation("document has no frames".into()));
        }
        if frames.ncols() == 0 {
            return Err(Error::Validation(
                "feature dimension must be at least 1".into(),
            ));
        }
        if let Some(((r, c), v)) = frames.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value {v} at frame {r}, dimension {c}"
            )));
        }
        Ok(AcousticDocument { frames })
    }

    pub fn frame_count(&self) -> usize {
        self.frames.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.frames.ncols()
    }
}

/// Stack documents into one pooled frame matrix, preserving order.
pub fn pool_frames(docs: &[&AcousticDocument]) -> Result<Array2<f64>> {
    let first = docs
        .first()
        .ok_or_else(|| Error::Validation("no documents to pool".into()))?;
    let dim = first.feature_dim();
    let total: usize = docs.iter().map(|d| d.frame_count()).sum();
    let mut pooled = Array2::zeros((total, dim));
    let mut row = 0;
    for doc in docs {
        if doc.feature_dim() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: doc.feature_dim(),
            });
        }
        for frame in doc.frames.rows() {
            pooled.row_mut(row).assign(&frame);
            row += 1;
        }
    }
    Ok(pooled)
}

/// Write a frame matrix in the binary format.
pub fn save_feature_matrix(path: &Path, doc: &AcousticDocument) -> Result<()> {
    let t = doc.frame_count() as u64;
    let f = doc.feature_dim() as u64;
    let mut buf = Vec::with_capacity(32 + doc.frames.len() * 8);
    buf.extend_from_slice(MATRIX_MAGIC);
    buf.extend_from_slice(&MATRIX_VERSION.to_le_bytes());
    buf.extend_from_slice(&t.to_le_bytes());
    buf.extend_from_slice(&f.to_le_bytes());
    for v in doc.frames.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Load a frame matrix, auto-detecting binary vs CSV by the magic bytes.
pub fn load_feature_matrix(path: &Path) -> Result<AcousticDocument> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    if data.starts_with(MATRIX_MAGIC) {
        load_binary(path, &data)
    } else {
        load_csv(path, &data)
    }
}

fn load_binary(path: &Path, data: &[u8]) -> Result<AcousticDocument> {
    let mut pos = MATRIX_MAGIC.len();
    let mut read_u64 = |what: &str| -> Result<u64> {
        let end = pos + 8;
        let bytes = data
            .get(pos..end)
            .ok_or_else(|| Error::format(path, format!("truncated before {what}")))?;
        pos = end;
        Ok(u64::from_le_bytes(bytes.try_into().unwrap()))
    };
    let version = read_u64("version")?;
    if version != MATRIX_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported matrix version {version}, expected {MATRIX_VERSION}"),
        ));
    }
    let rows = read_u64("row count")? as usize;
    let cols = read_u64("column count")? as usize;
    let header = MATRIX_MAGIC.len() + 24;
    let want = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::format(path, "matrix dimensions overflow"))?;
    if data.len() != header + want {
        return Err(Error::format(
            path,
            format!(
                "payload is {} bytes, expected {} for a {rows}x{cols} matrix",
                data.len() - header,
                want
            ),
        ));
    }
    let mut values = Vec::with_capacity(rows * cols);
    for chunk in data[header..].chunks_exact(8) {
        values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    let frames = Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| Error::format(path, e.to_string()))?;
    AcousticDocument::new(frames).map_err(|e| Error::format(path, e.to_string()))
}

fn load_csv(path: &Path, data: &[u8]) -> Result<AcousticDocument> {
    let text = std::str::from_utf8(data)
        .map_err(|_| Error::format(path, "file is neither binary matrix nor UTF-8 CSV"))?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (line_no, header) = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty CSV matrix"))?;
    let dims: Vec<&str> = header.split(',').map(str::trim).collect();
    if dims.len() != 2 {
        return Err(Error::parse(
            path,
            line_no,
            "header must be `rows,cols`",
        ));
    }
    let rows: usize = dims[0]
        .parse()
        .map_err(|_| Error::parse(path, line_no, format!("bad row count {:?}", dims[0])))?;
    let cols: usize = dims[1]
        .parse()
        .map_err(|_| Error::parse(path, line_no, format!("bad column count {:?}", dims[1])))?;

    let mut values = Vec::with_capacity(rows * cols);
    let mut seen = 0usize;
    for (line_no, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected {cols} values, found {}", fields.len()),
            ));
        }
        for field in fields {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(path, line_no, format!("bad value {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(path, line_no, format!("non-finite value {v}")));
            }
            values.push(v);
        }
        seen += 1;
    }
    if seen != rows {
        return Err(Error::format(
            path,
            format!("header declares {rows} rows, found {seen}"),
        ));
    }
    let frames = Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| Error::format(path, e.to_string()))?;
    AcousticDocument::new(frames).map_err(|e| Error::format(path, e.to_string()))
}
