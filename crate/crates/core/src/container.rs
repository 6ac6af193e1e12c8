//! Self-describing little-endian binary layout for sampled functions:
//!
//! ```text
//! magic  b"HEISGF01"
//! u32    axis count d
//! d × (f64 half-width U, u64 points M)
//! u64    value count (= ∏ M)
//! value count × (f64 re, f64 im), row-major, last axis fastest
//! ```

use crate::error::{Error, Result};
use crate::phase_space::{Grid1D, GridFunction, TensorGrid};
use crate::C64;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"HEISGF01";

pub fn write_grid_function<W: Write>(w: &mut W, f: &GridFunction) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(f.grid.axes.len() as u32).to_le_bytes())?;
    for a in &f.grid.axes {
        w.write_all(&a.half_width().to_le_bytes())?;
        w.write_all(&(a.points() as u64).to_le_bytes())?;
    }
    w.write_all(&(f.values.len() as u64).to_le_bytes())?;
    for v in &f.values {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| Error::Format(format!("truncated container: {e}")))?;
    Ok(b)
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

/// Axis counts above this are rejected as corrupt headers.
const MAX_AXES: u32 = 16;

pub fn read_grid_function<R: Read>(r: &mut R) -> Result<GridFunction> {
    let magic: [u8; 8] = read_array(r)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let d = u32::from_le_bytes(read_array(r)?);
    if d == 0 || d > MAX_AXES {
        return Err(Error::Format(format!("axis count {d} out of range")));
    }
    let mut axes = Vec::with_capacity(d as usize);
    for _ in 0..d {
        let u = read_f64(r)?;
        let m = read_u64(r)?;
        let m = usize::try_from(m).map_err(|_| Error::Format("axis length overflows".into()))?;
        axes.push(Grid1D::new(u, m).map_err(|e| Error::Format(format!("bad axis: {e}")))?);
    }
    let grid = TensorGrid::new(axes);
    let count = read_u64(r)?;
    if count != grid.len() as u64 {
        return Err(Error::Format(format!("{count} values for a grid of {} nodes", grid.len())));
    }
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..count {
        let re = read_f64(r)?;
        let im = read_f64(r)?;
        values.push(C64::new(re, im));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after values".into()));
    }
    GridFunction::new(grid, values)
}

pub fn save(path: &Path, f: &GridFunction) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_grid_function(&mut w, f)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<GridFunction> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    read_grid_function(&mut r)
}
