//! Binary field snapshots: `"KSF1"`, then `d` as u32 LE, then `d` u32 LE
//! extents, then the row-major f64 LE values.

use std::fs;
use std::path::Path;

use crate::error::{KsError, Result, SnapshotErrorKind};
use crate::spectral::{ScalarField, TorusGrid};

pub const MAGIC: &[u8; 4] = b"KSF1";

pub fn encode_snapshot(field: &ScalarField) -> Vec<u8> {
    let grid = field.grid();
    let mut out = Vec::with_capacity(8 + 4 * grid.dim() + 8 * grid.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    for _ in 0..grid.dim() {
        out.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    }
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_snapshot(bytes: &[u8], path: &Path) -> Result<ScalarField> {
    let fail = |kind| KsError::Snapshot {
        path: path.to_path_buf(),
        kind,
    };
    let need = |expected: usize| {
        if bytes.len() < expected {
            Err(fail(SnapshotErrorKind::Truncated {
                expected,
                found: bytes.len(),
            }))
        } else {
            Ok(())
        }
    };
    need(4)?;
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if &magic != MAGIC {
        return Err(fail(SnapshotErrorKind::BadMagic(magic)));
    }
    need(8)?;
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
    let dim = u32_at(4);
    if !(2..=3).contains(&dim) {
        return Err(fail(SnapshotErrorKind::ExtentMismatch(format!(
            "unsupported dimension {dim}"
        ))));
    }
    let header = 8 + 4 * dim;
    need(header)?;
    let extents: Vec<usize> = (0..dim).map(|j| u32_at(8 + 4 * j)).collect();
    if extents.iter().any(|&e| e != extents[0]) {
        return Err(fail(SnapshotErrorKind::ExtentMismatch(format!(
            "extents {extents:?} are not equal"
        ))));
    }
    let grid = TorusGrid::new(dim, extents[0])
        .map_err(|e| fail(SnapshotErrorKind::ExtentMismatch(e.to_string())))?;
    let total = header + 8 * grid.len();
    need(total)?;
    if bytes.len() > total {
        return Err(fail(SnapshotErrorKind::TrailingBytes(bytes.len() - total)));
    }
    let values = bytes[header..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ScalarField::new(grid, values)
}

pub fn write_snapshot(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_snapshot(field)).map_err(|e| KsError::io(path, e))
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<ScalarField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| KsError::io(path, e))?;
    decode_snapshot(&bytes, path)
}
