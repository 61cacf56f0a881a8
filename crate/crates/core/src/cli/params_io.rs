//! Binary parameter files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "GS2D"            4 bytes magic
//! version           u32 (= 1)
//! H, W              u32 image height and width (before padding)
//! p, a, N_patch     u32 patch size, overlap pad, Gaussians per cell
//! params            f32 × cells × N_patch × 9
//! ```
//!
//! Cells are stored row-major, Gaussians in index order, and each Gaussian's
//! nine raw fields in block order (offset, Cholesky, color, opacity). Anchors
//! are not stored: they are recomputed from the lattice.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{GridGeometry, PatchGrid};

pub const MAGIC: &[u8; 4] = b"GS2D";
pub const VERSION: u32 = 1;

/// A grid together with the unpadded image size it was fitted to.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamFile {
    pub height: usize,
    pub width: usize,
    pub grid: PatchGrid,
}

/// Rounds every parameter to the nearest `f32`, matching what the file stores.
pub fn quantize_to_f32(grid: &mut PatchGrid) {
    for cell in grid.cells_mut() {
        for v in cell.params_mut() {
            *v = *v as f32 as f64;
        }
    }
}

pub fn encode(file: &ParamFile) -> Vec<u8> {
    let g = file.grid.geometry();
    let mut out = Vec::with_capacity(32 + file.grid.param_count() * 4);
    out.extend_from_slice(MAGIC);
    for v in [
        VERSION,
        file.height as u32,
        file.width as u32,
        g.patch_size as u32,
        g.overlap_pad as u32,
        file.grid.gaussians_per_patch() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for cell in file.grid.cells() {
        for &v in cell.params() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<ParamFile> {
    let bad = |m: &str| Error::BadParamFile(m.to_string());
    if bytes.len() < 28 || &bytes[..4] != MAGIC {
        return Err(bad("missing GS2D header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    if word(0) != VERSION {
        return Err(bad(&format!("unsupported version {}", word(0))));
    }
    let (height, width) = (word(1) as usize, word(2) as usize);
    let (p, a, n) = (word(3) as usize, word(4) as usize, word(5) as usize);
    let geometry = GridGeometry::covering(height, width, p, a).map_err(|e| bad(&e.to_string()))?;
    let mut grid = PatchGrid::with_lattice(geometry, n).map_err(|e| bad(&e.to_string()))?;
    let body = &bytes[28..];
    if body.len() != grid.param_count() * 4 {
        return Err(bad(&format!(
            "expected {} parameter bytes, found {}",
            grid.param_count() * 4,
            body.len()
        )));
    }
    let mut floats = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
    for cell in grid.cells_mut() {
        for v in cell.params_mut() {
            *v = floats.next().unwrap();
            if !v.is_finite() {
                return Err(bad("non-finite parameter"));
            }
        }
    }
    Ok(ParamFile { height, width, grid })
}

pub fn save(path: &Path, file: &ParamFile) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode(file)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ParamFile> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
