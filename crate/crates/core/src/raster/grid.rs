use crate::error::{Error, Result};
use crate::gaussian::{GaussianSet, Vec2};

/// Default cell edge length in pixels.
pub const DEFAULT_PATCH_SIZE: usize = 16;
/// Default overlap border in pixels.
pub const DEFAULT_OVERLAP_PAD: usize = 1;
/// Default number of Gaussians per cell.
pub const DEFAULT_GAUSSIANS_PER_PATCH: usize = 324;

/// Geometry of a patch grid, independent of its Gaussians.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridGeometry {
    pub patch_size: usize,
    pub overlap_pad: usize,
    pub rows: usize,
    pub cols: usize,
}

impl GridGeometry {
    pub fn new(height: usize, width: usize, patch_size: usize, overlap_pad: usize) -> Result<Self> {
        if patch_size == 0 {
            return Err(Error::InvalidConfig("patch size must be positive".into()));
        }
        if 2 * overlap_pad >= patch_size {
            return Err(Error::InvalidConfig(format!(
                "overlap pad {overlap_pad} must be below half the patch size {patch_size}"
            )));
        }
        if height == 0 || width == 0 || height % patch_size != 0 || width % patch_size != 0 {
            return Err(Error::InvalidConfig(format!(
                "image {height}x{width} is not a positive multiple of patch size {patch_size}"
            )));
        }
        Ok(GridGeometry {
            patch_size,
            overlap_pad,
            rows: height / patch_size,
            cols: width / patch_size,
        })
    }

    /// Geometry for an image of any size, rounded up to whole cells.
    pub fn covering(height: usize, width: usize, patch_size: usize, overlap_pad: usize) -> Result<Self> {
        let up = |n: usize| n.div_ceil(patch_size.max(1)) * patch_size;
        Self::new(up(height), up(width), patch_size, overlap_pad)
    }

    pub fn height(&self) -> usize {
        self.rows * self.patch_size
    }

    pub fn width(&self) -> usize {
        self.cols * self.patch_size
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height(), self.width())
    }

    pub fn cell_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Side of the extended window, `p + 2a`.
    pub fn extended_size(&self) -> usize {
        self.patch_size + 2 * self.overlap_pad
    }

    pub fn cell_index(&self, row: usize, col: usize) -> Result<usize> {
        if row >= self.rows || col >= self.cols {
            return Err(Error::CellOutOfRange {
                row,
                col,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(row * self.cols + col)
    }

    pub fn cell_coords(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    /// Top-left pixel of the extended window, which may be negative.
    pub fn window_origin(&self, index: usize) -> (i64, i64) {
        let (r, c) = self.cell_coords(index);
        let a = self.overlap_pad as i64;
        let p = self.patch_size as i64;
        (r as i64 * p - a, c as i64 * p - a)
    }

    /// Offset scale mapping `tanh` output to half the extended window.
    pub fn offset_scale(&self) -> Vec2 {
        let half = self.extended_size() as f64 / 2.0;
        [half, half]
    }

    /// Uniform `n × n` lattice of anchor positions over the cell's extended window.
    pub fn lattice_anchors(&self, index: usize, per_side: usize) -> Vec<Vec2> {
        let (r0, c0) = self.window_origin(index);
        let spacing = self.lattice_spacing(per_side);
        let mut anchors = Vec::with_capacity(per_side * per_side);
        for i in 0..per_side {
            for j in 0..per_side {
                anchors.push([
                    c0 as f64 + (j as f64 + 0.5) * spacing,
                    r0 as f64 + (i as f64 + 0.5) * spacing,
                ]);
            }
        }
        anchors
    }

    pub fn lattice_spacing(&self, per_side: usize) -> f64 {
        self.extended_size() as f64 / per_side as f64
    }
}

/// Integer square root for perfect squares.
pub fn lattice_side(count: usize) -> Result<usize> {
    let side = (count as f64).sqrt().round() as usize;
    if side * side != count || count == 0 {
        return Err(Error::InvalidConfig(format!(
            "gaussians per patch ({count}) must be a positive perfect square"
        )));
    }
    Ok(side)
}

/// Partition of an image into cells, each owning its own [`GaussianSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct PatchGrid {
    geometry: GridGeometry,
    cells: Vec<GaussianSet>,
}

impl PatchGrid {
    pub fn new(geometry: GridGeometry, cells: Vec<GaussianSet>) -> Result<Self> {
        if cells.len() != geometry.cell_count() {
            return Err(Error::dims(
                format!("{} cells", geometry.cell_count()),
                format!("{} cells", cells.len()),
            ));
        }
        if let Some(first) = cells.first() {
            if cells.iter().any(|c| c.count() != first.count()) {
                return Err(Error::InvalidConfig(
                    "every cell must hold the same number of Gaussians".into(),
                ));
            }
        }
        Ok(PatchGrid { geometry, cells })
    }

    /// Grid whose cells hold `per_patch` zero-initialized Gaussians on a lattice.
    pub fn with_lattice(geometry: GridGeometry, per_patch: usize) -> Result<Self> {
        let side = lattice_side(per_patch)?;
        let scale = geometry.offset_scale();
        let cells = (0..geometry.cell_count())
            .map(|k| GaussianSet::new(geometry.lattice_anchors(k, side), scale))
            .collect();
        Self::new(geometry, cells)
    }

    /// Grid with no Gaussians at all.
    pub fn empty(geometry: GridGeometry) -> Self {
        let scale = geometry.offset_scale();
        PatchGrid {
            geometry,
            cells: vec![GaussianSet::empty(scale); geometry.cell_count()],
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn dims(&self) -> (usize, usize) {
        self.geometry.dims()
    }

    pub fn cells(&self) -> &[GaussianSet] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [GaussianSet] {
        &mut self.cells
    }

    pub fn cell(&self, row: usize, col: usize) -> Result<&GaussianSet> {
        Ok(&self.cells[self.geometry.cell_index(row, col)?])
    }

    pub fn gaussians_per_patch(&self) -> usize {
        self.cells.first().map_or(0, GaussianSet::count)
    }

    pub fn total_gaussians(&self) -> usize {
        self.cells.iter().map(GaussianSet::count).sum()
    }

    /// All cells' Gaussians as one set, in cell-major order.
    pub fn union(&self) -> GaussianSet {
        GaussianSet::union(&self.cells)
    }

    pub fn param_count(&self) -> usize {
        self.cells.iter().map(|c| c.params().len()).sum()
    }
}
