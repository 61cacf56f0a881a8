use crate::error::Result;
use crate::gaussian::{inverse_softplus, logit, RawGaussian};
use crate::image::{ImageBuffer, MaskBuffer};
use crate::raster::{lattice_side, GridGeometry, PatchGrid};

/// Builds a grid with `per_patch` Gaussians per cell on a uniform lattice over
/// each extended window.
///
/// Offsets start at zero, covariances are isotropic with a standard deviation
/// of half the lattice spacing, opacity is 0.5, and colors are read from the
/// target at the anchor's pixel when that pixel is observed (0.5 otherwise).
pub fn initialize_grid(
    geometry: GridGeometry,
    per_patch: usize,
    target: &ImageBuffer,
    mask: &MaskBuffer,
) -> Result<PatchGrid> {
    target.ensure_dims(geometry.dims())?;
    let side = lattice_side(per_patch)?;
    let std = 0.5 * geometry.lattice_spacing(side);
    let l_diag = inverse_softplus(std);
    let mut grid = PatchGrid::with_lattice(geometry, per_patch)?;
    let (h, w) = geometry.dims();
    for cell in grid.cells_mut() {
        for i in 0..cell.count() {
            let [x, y] = cell.anchors()[i];
            let (col, row) = (x.floor(), y.floor());
            let inside = col >= 0.0 && row >= 0.0 && (col as usize) < w && (row as usize) < h;
            let color_raw = if inside && mask.get(row as usize, col as usize) {
                target.pixel(row as usize, col as usize).map(logit)
            } else {
                [0.0; 3]
            };
            let raw = RawGaussian {
                mu_bias_raw: [0.0, 0.0],
                l_params: [l_diag, 0.0, l_diag],
                color_raw,
                sigma_raw: 0.0,
            };
            cell.set_raw(i, &raw);
        }
    }
    Ok(grid)
}
