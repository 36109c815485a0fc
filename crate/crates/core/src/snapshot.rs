//! `.fsnap` snapshot files: one line of JSON header (`N`, `L`, `n`,
//! `time_stamp`) terminated by `\n`, followed by the node values as
//! little-endian `f64` in row-major order.

use crate::error::{Error, Result};
use crate::grid::{DistributionFunction, VelocityGrid};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    #[serde(rename = "N")]
    pub dim: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub n: usize,
    pub time_stamp: f64,
}

pub fn write_snapshot<T: Real, W: Write>(f: &DistributionFunction<T>, mut out: W) -> Result<()> {
    let g = f.grid();
    let header = SnapshotHeader {
        dim: g.dim(),
        half_width: g.half_width().to_f64_lossy(),
        n: g.points_per_axis(),
        time_stamp: f.time().to_f64_lossy(),
    };
    let json = serde_json::to_string(&header).map_err(|e| Error::Snapshot(e.to_string()))?;
    out.write_all(json.as_bytes())?;
    out.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(8 * f.values().len());
    for v in f.values() {
        buf.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn save_snapshot<T: Real>(f: &DistributionFunction<T>, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_snapshot(f, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Reads the header and raw values.
pub fn read_snapshot_raw<R: Read>(input: R) -> Result<(SnapshotHeader, Vec<f64>)> {
    let mut reader = BufReader::new(input);
    let mut line = Vec::new();
    reader.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::Snapshot("missing header terminator".into()));
    }
    let header: SnapshotHeader =
        serde_json::from_slice(&line[..line.len() - 1]).map_err(|e| Error::Snapshot(e.to_string()))?;
    if header.dim != 2 && header.dim != 3 {
        return Err(Error::Snapshot(format!("unsupported dimension {}", header.dim)));
    }
    let count = header
        .n
        .checked_pow(header.dim as u32)
        .ok_or_else(|| Error::Snapshot("node count overflows".into()))?;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * count {
        return Err(Error::Snapshot(format!(
            "expected {} payload bytes, found {}",
            8 * count,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((header, values))
}

/// Reads a snapshot onto `grid`, which must match the header's `N`, `L`, `n`.
pub fn read_snapshot<T: Real, R: Read>(input: R, grid: Arc<VelocityGrid<T>>) -> Result<DistributionFunction<T>> {
    let (h, values) = read_snapshot_raw(input)?;
    if h.dim != grid.dim() || h.n != grid.points_per_axis() || h.half_width != grid.half_width().to_f64_lossy() {
        return Err(Error::GridMismatch(format!(
            "snapshot is (N={}, L={}, n={}), grid is (N={}, L={}, n={})",
            h.dim,
            h.half_width,
            h.n,
            grid.dim(),
            grid.half_width(),
            grid.points_per_axis()
        )));
    }
    DistributionFunction::new(grid, values.into_iter().map(T::lit).collect(), T::lit(h.time_stamp))
}

pub fn load_snapshot<T: Real>(path: impl AsRef<Path>, grid: Arc<VelocityGrid<T>>) -> Result<DistributionFunction<T>> {
    let file = std::fs::File::open(path)?;
    read_snapshot(file, grid)
}
