//! `EPC1` embedding container.
//!
//! Layout, all little-endian:
//!
//! | offset | size      | content                       |
//! |--------|-----------|-------------------------------|
//! | 0      | 4         | magic `EPC1`                  |
//! | 4      | 4         | `u32` row count `N`           |
//! | 8      | 4         | `u32` column count `d`        |
//! | 12     | `4 N d`   | `f32` values, row-major       |
//!
//! Values are widened to `f64` on load; widening is exact, so a save/load
//! round trip reproduces every `f32` bit pattern.

use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const EPC_MAGIC: [u8; 4] = *b"EPC1";
const HEADER_LEN: u64 = 12;

fn format_err(path: &Path, offset: u64, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset,
        message: message.into(),
    }
}

pub fn load_embedding(path: impl AsRef<Path>) -> Result<Matrix<f64>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_embedding(&bytes, path)
}

/// Decodes a container; `path` only labels errors.
pub fn decode_embedding(bytes: &[u8], path: &Path) -> Result<Matrix<f64>> {
    let len = bytes.len() as u64;
    if len < 4 {
        return Err(format_err(path, len, "file ends inside the magic"));
    }
    if bytes[..4] != EPC_MAGIC {
        return Err(format_err(
            path,
            0,
            format!("bad magic {:02x?}", &bytes[..4]),
        ));
    }
    if len < HEADER_LEN {
        return Err(format_err(path, len, "file ends inside the header"));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if rows == 0 {
        return Err(format_err(path, 4, "row count is zero"));
    }
    if cols == 0 {
        return Err(format_err(path, 8, "column count is zero"));
    }
    let count = u64::from(rows) * u64::from(cols);
    let expected = HEADER_LEN + 4 * count;
    if len < expected {
        return Err(format_err(
            path,
            len,
            format!("truncated payload: header {rows}x{cols} needs {expected} bytes"),
        ));
    }
    if len > expected {
        return Err(format_err(
            path,
            expected,
            format!(
                "{} trailing bytes after a {rows}x{cols} payload",
                len - expected
            ),
        ));
    }
    let mut data = Vec::with_capacity(count as usize);
    for (k, chunk) in bytes[HEADER_LEN as usize..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            let (r, c) = (k / cols as usize, k % cols as usize);
            return Err(format_err(
                path,
                HEADER_LEN + 4 * k as u64,
                format!("non-finite value {v} at row {r}, column {c}"),
            ));
        }
        data.push(f64::from(v));
    }
    Matrix::new(rows as usize, cols as usize, data)
}

/// Encodes with narrowing to `f32`; values that overflow `f32` are rejected.
pub fn encode_embedding(m: &Matrix<f64>) -> Result<Vec<u8>> {
    let rows =
        u32::try_from(m.rows()).map_err(|_| Error::SizeGuard("too many rows for EPC1".into()))?;
    let cols = u32::try_from(m.cols())
        .map_err(|_| Error::SizeGuard("too many columns for EPC1".into()))?;
    let mut out = Vec::with_capacity(12 + 4 * m.as_slice().len());
    out.extend_from_slice(&EPC_MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for (k, &v) in m.as_slice().iter().enumerate() {
        let narrow = v as f32;
        if !narrow.is_finite() {
            return Err(Error::NonFinite {
                row: k / m.cols(),
                col: k % m.cols(),
            });
        }
        out.extend_from_slice(&narrow.to_le_bytes());
    }
    Ok(out)
}

pub fn save_embedding(path: impl AsRef<Path>, m: &Matrix<f64>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_embedding(m)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("mem")
    }

    fn offset_of(e: Error) -> u64 {
        match e {
            Error::Format { offset, .. } => offset,
            other => panic!("expected a format error, got {other}"),
        }
    }

    #[test]
    fn decodes_small_file() {
        let m = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let bytes = encode_embedding(&m).unwrap();
        assert_eq!(bytes.len(), 12 + 16);
        assert_eq!(&bytes[..4], b"EPC1");
        assert_eq!(decode_embedding(&bytes, p()).unwrap(), m);
    }

    #[test]
    fn native_shape_size() {
        let m = Matrix::<f64>::zeros(77, 768).unwrap();
        let bytes = encode_embedding(&m).unwrap();
        assert_eq!(bytes.len(), 236_556);
        assert!(decode_embedding(&bytes, p()).is_ok());
        assert_eq!(
            offset_of(decode_embedding(&bytes[..236_555], p()).unwrap_err()),
            236_555
        );
        let mut long = bytes.clone();
        long.push(0);
        assert_eq!(
            offset_of(decode_embedding(&long, p()).unwrap_err()),
            236_556
        );
    }

    #[test]
    fn header_errors() {
        assert_eq!(offset_of(decode_embedding(b"EP", p()).unwrap_err()), 2);
        assert_eq!(
            offset_of(decode_embedding(b"NOPE\x01\0\0\0\x01\0\0\0", p()).unwrap_err()),
            0
        );
        assert_eq!(
            offset_of(decode_embedding(b"EPC1\x01\0", p()).unwrap_err()),
            6
        );
        assert_eq!(
            offset_of(decode_embedding(b"EPC1\0\0\0\0\x01\0\0\0", p()).unwrap_err()),
            4
        );
        assert_eq!(
            offset_of(decode_embedding(b"EPC1\x01\0\0\0\0\0\0\0", p()).unwrap_err()),
            8
        );
    }

    #[test]
    fn non_finite_payload_names_offset() {
        let m = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let mut bytes = encode_embedding(&m).unwrap();
        bytes[12 + 8..12 + 12].copy_from_slice(&f32::NAN.to_le_bytes());
        assert_eq!(offset_of(decode_embedding(&bytes, p()).unwrap_err()), 20);
    }

    #[test]
    fn narrowing_overflow_rejected() {
        let m = Matrix::from_rows(&[[1e39]]).unwrap();
        assert!(matches!(
            encode_embedding(&m),
            Err(Error::NonFinite { row: 0, col: 0 })
        ));
    }
}
