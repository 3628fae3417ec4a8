//! `ALP1` binary field snapshots.
//!
//! Layout: the magic bytes `ALP1`, three `u32` little-endian dimensions, one
//! `u8` rank tag (0 = scalar, 1 = vector3), then every complex coefficient as
//! two little-endian `f64` (re, im). Coefficients follow the in-memory order:
//! vector component outermost, then row-major `(i0, i1, i2)` FFT indices.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{Rank, SpectralField};
use crate::grid::{make_grid, Grid};

pub const MAGIC: &[u8; 4] = b"ALP1";

pub fn write_field<W: Write>(mut w: W, f: &SpectralField) -> Result<()> {
    let n = f.grid().n() as u32;
    w.write_all(MAGIC)?;
    for _ in 0..3 {
        w.write_all(&n.to_le_bytes())?;
    }
    w.write_all(&[f.rank().tag()])?;
    for c in f.coeffs() {
        w.write_all(&c.re.to_le_bytes())?;
        w.write_all(&c.im.to_le_bytes())?;
    }
    Ok(())
}

/// Read a snapshot. When `grid` is given the dimensions must match it, and the
/// field shares its FFT plans.
pub fn read_field<R: Read>(mut r: R, grid: Option<&Grid>) -> Result<SpectralField> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut dims = [0u32; 3];
    for d in dims.iter_mut() {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        *d = u32::from_le_bytes(b);
    }
    if dims[0] != dims[1] || dims[1] != dims[2] {
        return Err(Error::Format(format!("non-cubic dims {dims:?}")));
    }
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    let rank = Rank::from_tag(tag[0])
        .ok_or_else(|| Error::Format(format!("unknown rank tag {}", tag[0])))?;
    let grid = match grid {
        Some(g) if g.n() == dims[0] as usize => g.clone(),
        Some(g) => {
            return Err(Error::Format(format!(
                "snapshot dims {} differ from grid {}",
                dims[0],
                g.n()
            )))
        }
        None => make_grid(dims[0] as usize)?,
    };
    let count = rank.components() * grid.len();
    let mut bytes = vec![0u8; count * 16];
    r.read_exact(&mut bytes)?;
    let coeffs = bytes
        .chunks_exact(16)
        .map(|ch| {
            let re = f64::from_le_bytes(ch[0..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(ch[8..16].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    SpectralField::from_coeffs(&grid, rank, coeffs)
}

pub fn save(path: impl AsRef<Path>, f: &SpectralField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field(&mut w, f)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>, grid: Option<&Grid>) -> Result<SpectralField> {
    read_field(BufReader::new(File::open(path)?), grid)
}
