//! Binary field dumps.
//!
//! Layout, all little-endian:
//!
//! | offset | size | content                                   |
//! |--------|------|-------------------------------------------|
//! | 0      | 8    | magic `ZKSNAP1\0`                         |
//! | 8      | 4    | u32 format version (1)                    |
//! | 12     | 4    | u32 `nx`                                  |
//! | 16     | 4    | u32 `ny`                                  |
//! | 20     | 4    | u32 flags: bit 0 clean, bit 1 strip       |
//! | 24     | 8    | f64 `L`                                   |
//! | 32     | 8    | f64 `B`                                   |
//! | 40     | 8    | f64 `t`                                   |
//! | 48     | 8·N  | f64 values, `N = (nx+2)(ny+2)`, index `i*(ny+2)+j` |

use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::geometry::{DomainKind, Field, GeometryError, Grid};

pub const MAGIC: [u8; 8] = *b"ZKSNAP1\0";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 48;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a snapshot file (bad magic)")]
    BadMagic,
    #[error("unsupported snapshot version {0}")]
    Version(u32),
    #[error("snapshot truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub fn encode(field: &Field, t: f64) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * g.node_count());
    out.extend_from_slice(&MAGIC);
    let mut flags = 0u32;
    if field.is_clean() {
        flags |= 1;
    }
    if g.kind() == DomainKind::TruncatedStrip {
        flags |= 2;
    }
    for v in [VERSION, g.nx() as u32, g.ny() as u32, flags] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in [g.length(), g.half_width(), t] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn u32_at(b: &[u8], o: usize) -> u32 {
    u32::from_le_bytes(b[o..o + 4].try_into().expect("4-byte slice"))
}

fn f64_at(b: &[u8], o: usize) -> f64 {
    f64::from_le_bytes(b[o..o + 8].try_into().expect("8-byte slice"))
}

/// Returns the field and its time stamp. The clean flag is recomputed from the values.
pub fn decode(bytes: &[u8]) -> Result<(Field, f64), SnapshotError> {
    if bytes.len() < HEADER_LEN {
        return Err(SnapshotError::Truncated { expected: HEADER_LEN, found: bytes.len() });
    }
    if bytes[..8] != MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    let version = u32_at(bytes, 8);
    if version != VERSION {
        return Err(SnapshotError::Version(version));
    }
    let (nx, ny, flags) = (u32_at(bytes, 12) as usize, u32_at(bytes, 16) as usize, u32_at(bytes, 20));
    let kind = if flags & 2 != 0 { DomainKind::TruncatedStrip } else { DomainKind::Rectangle };
    let grid = Grid::new(f64_at(bytes, 24), f64_at(bytes, 32), nx, ny, kind)?;
    let t = f64_at(bytes, 40);
    let expected = HEADER_LEN + 8 * grid.node_count();
    if bytes.len() != expected {
        return Err(SnapshotError::Truncated { expected, found: bytes.len() });
    }
    let values = bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    Ok((Field::from_values(grid, values)?, t))
}

pub fn write_snapshot(path: &Path, field: &Field, t: f64) -> Result<(), SnapshotError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(field, t))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(Field, f64), SnapshotError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}
