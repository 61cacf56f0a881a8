//! Analytic gradients of a pixel-space loss with respect to raw Gaussian parameters.
//!
//! Chain, per Gaussian and pixel `p`:
//!
//! ```text
//! μ = anchor + tanh(m) ⊙ s          Σ = L·Lᵀ + εI,  L = [[softplus(l11), 0], [l21, softplus(l22)]]
//! q = (p−μ)ᵀ Σ⁻¹ (p−μ)               out = sigmoid(c) · sigmoid(σ̃) · exp(−q/2)
//! ```
//!
//! With `s = Σ⁻¹(p−μ)` and `g_q = ∂loss/∂q`, the covariance gradient is
//! `∂loss/∂Σ = −g_q s sᵀ`, and `∂loss/∂L = 2 (∂loss/∂Σ) L`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::{
    activate, pixel_center, sigmoid, CholeskyFactor, EffectiveGaussian, GaussianSet, RawGaussian,
    Rgb, Vec2, PARAMS_PER_GAUSSIAN,
};
use crate::image::ImageBuffer;
use crate::raster::{cell_window, BlendLayout, PatchGrid, RenderOptions, Window};

/// `∂loss/∂raw` for one Gaussian set, laid out like its parameter block.
#[derive(Clone, Debug, PartialEq)]
pub struct GradBlock {
    values: Vec<f64>,
}

impl GradBlock {
    pub fn zeros(count: usize) -> Self {
        GradBlock {
            values: vec![0.0; count * PARAMS_PER_GAUSSIAN],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        assert_eq!(values.len() % PARAMS_PER_GAUSSIAN, 0);
        GradBlock { values }
    }

    pub fn count(&self) -> usize {
        self.values.len() / PARAMS_PER_GAUSSIAN
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn gaussian(&self, i: usize) -> &[f64] {
        &self.values[i * PARAMS_PER_GAUSSIAN..(i + 1) * PARAMS_PER_GAUSSIAN]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// A Gaussian's activated values plus the local derivatives of each activation.
#[derive(Clone, Copy, Debug)]
pub struct Prepared {
    pub effective: EffectiveGaussian,
    factor: CholeskyFactor,
    dmu_dbias: Vec2,
    da_draw: f64,
    db_draw: f64,
    dcolor_draw: Rgb,
    dsigma_draw: f64,
}

impl Prepared {
    pub fn new(raw: &RawGaussian, anchor: Vec2, offset_scale: Vec2) -> Self {
        let effective = activate(raw, anchor, offset_scale);
        let t = raw.mu_bias_raw.map(f64::tanh);
        Prepared {
            effective,
            factor: CholeskyFactor::from_raw(raw.l_params),
            dmu_dbias: [
                offset_scale[0] * (1.0 - t[0] * t[0]),
                offset_scale[1] * (1.0 - t[1] * t[1]),
            ],
            da_draw: sigmoid(raw.l_params[0]),
            db_draw: sigmoid(raw.l_params[2]),
            dcolor_draw: effective.color.map(|c| c * (1.0 - c)),
            dsigma_draw: effective.sigma * (1.0 - effective.sigma),
        }
    }

    /// Adds the gradient of `upstream · eval(p)` to `out`. Culled pixels add nothing.
    #[inline]
    pub fn accumulate(&self, p: Vec2, upstream: Rgb, out: &mut [f64]) {
        let g = &self.effective;
        if !g.covers(p) {
            return;
        }
        let d = [p[0] - g.mu[0], p[1] - g.mu[1]];
        let w = g.falloff(p);
        let dot = upstream[0] * g.color[0] + upstream[1] * g.color[1] + upstream[2] * g.color[2];

        for ch in 0..3 {
            out[5 + ch] += upstream[ch] * g.sigma * w * self.dcolor_draw[ch];
        }
        out[8] += dot * w * self.dsigma_draw;

        let gq = -0.5 * g.sigma * dot * w;
        let inv = &g.cov_inv;
        let s = [inv.xx * d[0] + inv.xy * d[1], inv.xy * d[0] + inv.yy * d[1]];

        // ∂q/∂μ = −2 s
        out[0] += -2.0 * gq * s[0] * self.dmu_dbias[0];
        out[1] += -2.0 * gq * s[1] * self.dmu_dbias[1];

        let m00 = -gq * s[0] * s[0];
        let m01 = -gq * s[0] * s[1];
        let m11 = -gq * s[1] * s[1];
        let CholeskyFactor { a, l21, b } = self.factor;
        out[2] += 2.0 * (m00 * a + m01 * l21) * self.da_draw;
        out[3] += 2.0 * (m01 * a + m11 * l21);
        out[4] += 2.0 * (m11 * b) * self.db_draw;
    }
}

/// Gradient of `Σ_ch upstream_ch · eval_ch(p)` with respect to the nine raw parameters.
pub fn backward_pixel(
    raw: &RawGaussian,
    anchor: Vec2,
    offset_scale: Vec2,
    p: Vec2,
    upstream: Rgb,
) -> [f64; PARAMS_PER_GAUSSIAN] {
    let mut out = [0.0; PARAMS_PER_GAUSSIAN];
    Prepared::new(raw, anchor, offset_scale).accumulate(p, upstream, &mut out);
    out
}

pub fn prepare_set(set: &GaussianSet) -> Vec<Prepared> {
    (0..set.count())
        .map(|i| Prepared::new(&set.raw(i), set.anchors()[i], set.offset_scale()))
        .collect()
}

/// Backward of [`crate::raster::splat_window`]: `upstream` is laid out like the window buffer.
pub fn backward_window(set: &GaussianSet, window: &Window, upstream: &[f64]) -> GradBlock {
    debug_assert_eq!(upstream.len(), window.rows * window.cols * 3);
    let mut grad = GradBlock::zeros(set.count());
    let opts = RenderOptions::default();
    for (i, prep) in prepare_set(set).iter().enumerate() {
        let out = &mut grad.values[i * PARAMS_PER_GAUSSIAN..(i + 1) * PARAMS_PER_GAUSSIAN];
        let (rows, cols) = window.clip(&prep.effective, opts.cutoff);
        for r in rows {
            let base = (r - window.row0) as usize * window.cols;
            for c in cols.clone() {
                let k = (base + (c - window.col0) as usize) * 3;
                let u = [upstream[k], upstream[k + 1], upstream[k + 2]];
                if u == [0.0; 3] {
                    continue;
                }
                prep.accumulate(pixel_center(c, r), u, out);
            }
        }
    }
    grad
}

/// Gradient of a global render against an image-shaped upstream.
pub fn backward_global(set: &GaussianSet, upstream: &ImageBuffer) -> GradBlock {
    let (h, w) = upstream.dims();
    backward_window(set, &Window::full(h, w), upstream.data())
}

/// Per-cell gradients of `⟨upstream, render_patchwise(grid)⟩`.
pub fn backward_render(grid: &PatchGrid, upstream: &ImageBuffer) -> Result<Vec<GradBlock>> {
    upstream.ensure_dims(grid.dims())?;
    let layout = BlendLayout::new(grid.geometry());
    Ok(backward_render_with(grid, &layout, upstream))
}

pub(crate) fn backward_render_with(grid: &PatchGrid, layout: &BlendLayout, upstream: &ImageBuffer) -> Vec<GradBlock> {
    let geometry = grid.geometry();
    (0..geometry.cell_count())
        .into_par_iter()
        .map(|cell| {
            let window = cell_window(geometry, cell);
            let weighted = weighted_upstream(layout, cell, &window, upstream);
            backward_window(&grid.cells()[cell], &window, &weighted)
        })
        .collect()
}

fn weighted_upstream(layout: &BlendLayout, cell: usize, window: &Window, upstream: &ImageBuffer) -> Vec<f64> {
    let mut buf = vec![0.0; window.rows * window.cols * 3];
    let (rows, cols) = window.image_ranges();
    for r in rows {
        for c in cols.clone() {
            let w = layout.weight(cell, r as usize, c as usize);
            if w == 0.0 {
                continue;
            }
            let u = upstream.pixel(r as usize, c as usize);
            let k = (((r - window.row0) as usize) * window.cols + (c - window.col0) as usize) * 3;
            buf[k] = w * u[0];
            buf[k + 1] = w * u[1];
            buf[k + 2] = w * u[2];
        }
    }
    buf
}

/// Checks a gradient set against a grid's cells.
pub fn ensure_matching(grid: &PatchGrid, grads: &[GradBlock]) -> Result<()> {
    if grads.len() != grid.cells().len()
        || grads.iter().zip(grid.cells()).any(|(g, c)| g.count() != c.count())
    {
        return Err(Error::dims(
            format!("{} gradient blocks", grid.cells().len()),
            format!("{} gradient blocks", grads.len()),
        ));
    }
    Ok(())
}
