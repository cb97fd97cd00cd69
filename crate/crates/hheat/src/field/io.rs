//! Flat binary serialization of [`GridField`].
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  b"HHEATGF1"
//! n       u32
//! nx      u32
//! ny      u32
//! ntau    u32
//! lx      f64
//! ly      f64
//! ltau    f64
//! count   u64      (must equal nx^n * ny^n * ntau)
//! values  count * f64, row-major over axes (x_1..x_n, y_1..y_n, τ),
//!         τ index fastest
//! ```

use super::{GridField, GridSpec};
use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

pub const FIELD_MAGIC: &[u8; 8] = b"HHEATGF1";

pub fn write_field<W: Write>(w: &mut W, field: &GridField) -> Result<()> {
    let s = field.spec();
    w.write_all(FIELD_MAGIC)?;
    for v in [s.n() as u32, s.nx() as u32, s.ny() as u32, s.ntau() as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in [s.lx(), s.ly(), s.ltau()] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&(field.values().len() as u64).to_le_bytes())?;
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field<R: Read>(r: &mut R) -> Result<GridField> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != FIELD_MAGIC {
        return Err(Error::Format("bad field magic".into()));
    }
    let (spec, count) = read_spec_header(r)?;
    let values = read_f64s(r, count)?;
    GridField::new(spec, values)
}

pub(crate) fn read_spec_header<R: Read>(r: &mut R) -> Result<(GridSpec, usize)> {
    let n = read_u32(r)? as usize;
    let nx = read_u32(r)? as usize;
    let ny = read_u32(r)? as usize;
    let ntau = read_u32(r)? as usize;
    let lx = read_f64(r)?;
    let ly = read_f64(r)?;
    let ltau = read_f64(r)?;
    let spec = GridSpec::new(n, nx, ny, ntau, lx, ly, ltau)
        .map_err(|e| Error::Format(format!("invalid grid header: {e}")))?;
    let count = read_u64(r)? as usize;
    if count != spec.len() {
        return Err(Error::Format(format!(
            "value count {count} does not match grid size {}",
            spec.len()
        )));
    }
    Ok((spec, count))
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; count * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn save_field(path: &Path, field: &GridField) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_field(&mut f, field)
}

pub fn load_field(path: &Path) -> Result<GridField> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_field(&mut f)
}
