//! Binary field snapshots.
//!
//! Layout: magic "CHKS", version u32, nx u32, ny u32, Lx f64, Ly f64, t f64,
//! then nx*ny little-endian f64 samples, row-major. Reads are validated and
//! write/read round trips are bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

pub const MAGIC: &[u8; 4] = b"CHKS";
pub const VERSION: u32 = 1;

pub fn write_snapshot(path: &Path, field: &Field, t: f64) -> Result<()> {
    let grid = field.grid();
    let mut buf = Vec::with_capacity(4 + 4 * 3 + 8 * 3 + 8 * grid.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(grid.nx() as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.ny() as u32).to_le_bytes());
    buf.extend_from_slice(&grid.lx().to_le_bytes());
    buf.extend_from_slice(&grid.ly().to_le_bytes());
    buf.extend_from_slice(&t.to_le_bytes());
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(Field, f64)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    parse_snapshot(&bytes)
}

pub fn parse_snapshot(bytes: &[u8]) -> Result<(Field, f64)> {
    let header = 4 + 4 * 3 + 8 * 3;
    if bytes.len() < header {
        return Err(Error::SnapshotFormat("file shorter than the header".into()));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::SnapshotFormat(format!(
            "bad magic {:?}, expected {:?}",
            &bytes[0..4],
            MAGIC
        )));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("sliced"));
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("sliced"));
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::SnapshotFormat(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let nx = u32_at(8) as usize;
    let ny = u32_at(12) as usize;
    let lx = f64_at(16);
    let ly = f64_at(24);
    let t = f64_at(32);
    let grid = Grid::new(nx, ny, lx, ly)
        .map_err(|e| Error::SnapshotFormat(format!("bad grid in header: {e}")))?;
    let expected = header + 8 * grid.len();
    if bytes.len() != expected {
        return Err(Error::SnapshotFormat(format!(
            "payload length {} does not match {} x {} grid ({} expected)",
            bytes.len(),
            nx,
            ny,
            expected
        )));
    }
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        values.push(f64_at(header + 8 * i));
    }
    Ok((Field::new(grid, values)?, t))
}
