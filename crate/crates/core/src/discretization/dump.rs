//! Binary distribution dumps.
//!
//! Layout (all little-endian):
//!
//! ```text
//! magic      4 bytes  "MBGK"
//! version    u32      1 = velocity-only, 2 = with spatial section
//! dim        u32      1 or 3
//! per axis   u32 node_count, f64 v_min, f64 v_max
//! species    u32
//! [version 2: u32 cell_count, f64 length]
//! values     f64 ...
//! ```
//!
//! Version 1 stores, per species, the grid values in row-major order.
//! Version 2 stores, per species and per cell, `g` followed by `h`.

use std::io::{Read, Write};

use super::grid::{Axis, VelocityGrid};
use crate::error::{BgkError, Result};

pub const MAGIC: &[u8; 4] = b"MBGK";
pub const VERSION_VELOCITY: u32 = 1;
pub const VERSION_SPATIAL: u32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialHeader {
    pub cell_count: u32,
    pub length: f64,
}

/// Decoded dump contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Dump {
    pub grid: VelocityGrid,
    pub spatial: Option<SpatialHeader>,
    /// One block per species.
    pub species: Vec<Vec<f64>>,
}

impl Dump {
    fn block_len(&self) -> usize {
        match &self.spatial {
            None => self.grid.len(),
            Some(s) => 2 * s.cell_count as usize * self.grid.len(),
        }
    }
}

pub fn write_dump<W: Write>(mut w: W, dump: &Dump) -> Result<()> {
    let expected = dump.block_len();
    if let Some(bad) = dump.species.iter().position(|b| b.len() != expected) {
        return Err(BgkError::Format(format!(
            "species {bad} block has {} values, expected {expected}",
            dump.species[bad].len()
        )));
    }
    w.write_all(MAGIC)?;
    let version = if dump.spatial.is_some() { VERSION_SPATIAL } else { VERSION_VELOCITY };
    w.write_all(&version.to_le_bytes())?;
    w.write_all(&(dump.grid.dim() as u32).to_le_bytes())?;
    for axis in dump.grid.axes() {
        w.write_all(&(axis.nodes as u32).to_le_bytes())?;
        w.write_all(&axis.v_min.to_le_bytes())?;
        w.write_all(&axis.v_max.to_le_bytes())?;
    }
    w.write_all(&(dump.species.len() as u32).to_le_bytes())?;
    if let Some(s) = &dump.spatial {
        w.write_all(&s.cell_count.to_le_bytes())?;
        w.write_all(&s.length.to_le_bytes())?;
    }
    for block in &dump.species {
        for v in block {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_dump<R: Read>(mut r: R) -> Result<Dump> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(BgkError::Format(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION_VELOCITY && version != VERSION_SPATIAL {
        return Err(BgkError::Format(format!("unsupported version {version}")));
    }
    let dim = read_u32(&mut r)?;
    if dim != 1 && dim != 3 {
        return Err(BgkError::Format(format!("unsupported dimension {dim}")));
    }
    let mut axes = Vec::with_capacity(dim as usize);
    for _ in 0..dim {
        let nodes = read_u32(&mut r)? as usize;
        let v_min = read_f64(&mut r)?;
        let v_max = read_f64(&mut r)?;
        axes.push(Axis::new(nodes, v_min, v_max));
    }
    let grid = VelocityGrid::new(axes).map_err(|e| BgkError::Format(e.to_string()))?;
    let species_count = read_u32(&mut r)? as usize;
    let spatial = if version == VERSION_SPATIAL {
        Some(SpatialHeader { cell_count: read_u32(&mut r)?, length: read_f64(&mut r)? })
    } else {
        None
    };
    let mut dump = Dump { grid, spatial, species: Vec::with_capacity(species_count) };
    let len = dump.block_len();
    for _ in 0..species_count {
        let mut bytes = vec![0u8; 8 * len];
        r.read_exact(&mut bytes)?;
        let block = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        dump.species.push(block);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(BgkError::Format("trailing bytes after the last species block".into()));
    }
    Ok(dump)
}
