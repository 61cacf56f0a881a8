//! Forward rendering: global splatting and patch-level rendering with overlap blending.

mod blend;
mod grid;

pub use blend::{AxisCover, BlendLayout};
pub use grid::{
    lattice_side, GridGeometry, PatchGrid, DEFAULT_GAUSSIANS_PER_PATCH, DEFAULT_OVERLAP_PAD,
    DEFAULT_PATCH_SIZE,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::{pixel_center, EffectiveGaussian, GaussianSet};
use crate::image::ImageBuffer;

/// Rendering switches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RenderOptions {
    /// Drop contributions beyond each Gaussian's cutoff radius.
    pub cutoff: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions { cutoff: true }
    }
}

/// A rectangular pixel window `[row0, row0 + rows) × [col0, col0 + cols)` in
/// image coordinates, of which only `[0, height) × [0, width)` is rendered.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub row0: i64,
    pub col0: i64,
    pub rows: usize,
    pub cols: usize,
    pub height: usize,
    pub width: usize,
}

impl Window {
    pub fn full(height: usize, width: usize) -> Self {
        Window {
            row0: 0,
            col0: 0,
            rows: height,
            cols: width,
            height,
            width,
        }
    }

    /// Clamped ranges of image rows and columns inside the window.
    pub fn image_ranges(&self) -> (std::ops::Range<i64>, std::ops::Range<i64>) {
        let r = self.row0.max(0)..(self.row0 + self.rows as i64).min(self.height as i64);
        let c = self.col0.max(0)..(self.col0 + self.cols as i64).min(self.width as i64);
        (r, c)
    }

    /// Window pixels a Gaussian can reach, intersected with the image.
    pub fn clip(&self, g: &EffectiveGaussian, cutoff: bool) -> (std::ops::Range<i64>, std::ops::Range<i64>) {
        let (rows, cols) = self.image_ranges();
        if !cutoff {
            return (rows, cols);
        }
        let ([x0, x1], [y0, y1]) = g.pixel_bounds();
        (rows.start.max(y0)..rows.end.min(y1), cols.start.max(x0)..cols.end.min(x1))
    }
}

/// Renders a window of `rows × cols` pixels into a flat RGB buffer. Within each
/// pixel contributions are accumulated in Gaussian-index order.
pub fn splat_window(gaussians: &[EffectiveGaussian], window: &Window, opts: RenderOptions) -> Vec<f64> {
    let mut buf = vec![0.0; window.rows * window.cols * 3];
    for g in gaussians {
        let (rows, cols) = window.clip(g, opts.cutoff);
        for r in rows {
            let base = (r - window.row0) as usize * window.cols;
            for c in cols.clone() {
                let p = pixel_center(c, r);
                if opts.cutoff && !g.covers(p) {
                    continue;
                }
                let v = g.eval_unculled(p);
                let i = (base + (c - window.col0) as usize) * 3;
                buf[i] += v[0];
                buf[i + 1] += v[1];
                buf[i + 2] += v[2];
            }
        }
    }
    buf
}

/// Renders a Gaussian set over the whole image.
pub fn render_global(gaussians: &GaussianSet, dims: (usize, usize), opts: RenderOptions) -> ImageBuffer {
    render_effective(&gaussians.activate_all(), dims, opts)
}

pub fn render_effective(gaussians: &[EffectiveGaussian], dims: (usize, usize), opts: RenderOptions) -> ImageBuffer {
    let data = splat_window(gaussians, &Window::full(dims.0, dims.1), opts);
    ImageBuffer::from_vec(dims.0, dims.1, data).expect("render produced non-finite values")
}

/// One cell's render over its `(p + 2a)²` extended window.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchBuffer {
    pub window: Window,
    pub data: Vec<f64>,
}

impl PatchBuffer {
    /// Value at image pixel `(row, col)`, which must lie inside the window.
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> [f64; 3] {
        let r = (row as i64 - self.window.row0) as usize;
        let c = (col as i64 - self.window.col0) as usize;
        let i = (r * self.window.cols + c) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

pub fn cell_window(geometry: &GridGeometry, index: usize) -> Window {
    let (row0, col0) = geometry.window_origin(index);
    let n = geometry.extended_size();
    let (height, width) = geometry.dims();
    Window {
        row0,
        col0,
        rows: n,
        cols: n,
        height,
        width,
    }
}

fn render_cell(grid: &PatchGrid, index: usize) -> PatchBuffer {
    let window = cell_window(grid.geometry(), index);
    let effective = grid.cells()[index].activate_all();
    PatchBuffer {
        window,
        data: splat_window(&effective, &window, RenderOptions::default()),
    }
}

/// Renders cell `(row, col)` alone over its extended window. Window pixels
/// outside the image stay zero.
pub fn render_patch(grid: &PatchGrid, row: usize, col: usize) -> Result<PatchBuffer> {
    let index = grid.geometry().cell_index(row, col)?;
    Ok(render_cell(grid, index))
}

/// Blends per-cell renders into a full image. Each output row is written by
/// exactly one task.
pub fn composite(grid: &PatchGrid, rendered: &[PatchBuffer]) -> Result<ImageBuffer> {
    let geometry = grid.geometry();
    if rendered.len() < geometry.cell_count() {
        return Err(Error::MissingPatch(rendered.len()));
    }
    let layout = BlendLayout::new(geometry);
    Ok(composite_with(geometry, &layout, rendered))
}

pub(crate) fn composite_with(geometry: &GridGeometry, layout: &BlendLayout, rendered: &[PatchBuffer]) -> ImageBuffer {
    let (height, width) = geometry.dims();
    let mut data = vec![0.0; height * width * 3];
    data.par_chunks_mut(width * 3).enumerate().for_each(|(row, out)| {
        for col in 0..width {
            let mut acc = [0.0; 3];
            for (cell, w) in layout.pixel_weights(row, col) {
                let v = rendered[cell].at(row, col);
                acc[0] += w * v[0];
                acc[1] += w * v[1];
                acc[2] += w * v[2];
            }
            out[col * 3..col * 3 + 3].copy_from_slice(&acc);
        }
    });
    ImageBuffer::from_vec(height, width, data).expect("composite produced non-finite values")
}

/// Renders every cell (in parallel on the current rayon pool) and composites.
pub fn render_patchwise(grid: &PatchGrid) -> ImageBuffer {
    let layout = BlendLayout::new(grid.geometry());
    render_patchwise_with(grid, &layout)
}

pub(crate) fn render_patchwise_with(grid: &PatchGrid, layout: &BlendLayout) -> ImageBuffer {
    let rendered = render_all(grid);
    composite_with(grid.geometry(), layout, &rendered)
}

pub fn render_all(grid: &PatchGrid) -> Vec<PatchBuffer> {
    (0..grid.geometry().cell_count())
        .into_par_iter()
        .map(|k| render_cell(grid, k))
        .collect()
}

/// Number of Gaussians that must be resident at once to render one unit of output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WorkingSet {
    pub patch: usize,
    pub global: usize,
}

pub fn working_set(grid: &PatchGrid) -> WorkingSet {
    WorkingSet {
        patch: grid.cells().iter().map(GaussianSet::count).max().unwrap_or(0),
        global: grid.total_gaussians(),
    }
}
