//! Binary field rasters: the 4-byte magic `FRST`, a little-endian `u32`
//! version, `u64` nx and ny, `f64` dx, dy, x0, y0, then `nx * ny` `f64`
//! values in row-major order (x fastest).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid2D};

const MAGIC: &[u8; 4] = b"FRST";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 * 2 + 8 * 4;

pub fn encode(field: &Field) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(g.nx as u64).to_le_bytes());
    out.extend_from_slice(&(g.ny as u64).to_le_bytes());
    for v in [g.dx, g.dy, g.x0, g.y0] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Field> {
    let bad = |m: &str| Error::Config(format!("raster: {m}"));
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(bad("missing FRST header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(4) != VERSION {
        return Err(bad(&format!("unsupported version {}", u32_at(4))));
    }
    let (nx, ny) = (u64_at(8) as usize, u64_at(16) as usize);
    let grid = Grid2D::new(nx, ny, f64_at(24), f64_at(32), f64_at(40), f64_at(48))?;
    let n = nx.checked_mul(ny).ok_or_else(|| bad("size overflow"))?;
    if bytes.len() != HEADER_LEN + 8 * n {
        return Err(bad(&format!(
            "expected {} values, found {} bytes of data",
            n,
            bytes.len() - HEADER_LEN
        )));
    }
    let values = (0..n).map(|k| f64_at(HEADER_LEN + 8 * k)).collect();
    Field::new(grid, values)
}

pub fn write_raster(path: &Path, field: &Field) -> Result<()> {
    std::fs::File::create(path)?.write_all(&encode(field))?;
    Ok(())
}

pub fn read_raster(path: &Path) -> Result<Field> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

/// `x,y,value` rows at cell centers, for plotting.
pub fn to_csv(field: &Field) -> String {
    let g = field.grid();
    let mut s = String::from("x,y,value\n");
    for j in 0..g.ny {
        for i in 0..g.nx {
            s.push_str(&format!(
                "{},{},{}\n",
                g.x_center(i),
                g.y_center(j),
                field.at(i, j)
            ));
        }
    }
    s
}
