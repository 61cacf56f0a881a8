//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use splat_inpaint::gaussian::{GaussianSet, RawGaussian, PARAMS_PER_GAUSSIAN};
use splat_inpaint::image::{ImageBuffer, MaskBuffer};
use splat_inpaint::optim::masked_recons_loss;
use splat_inpaint::raster::{render_patchwise, GridGeometry, PatchGrid};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Raw Gaussian with every field uniform in `[-bound, bound]`.
pub fn random_raw(rng: &mut ChaCha8Rng, bound: f64) -> RawGaussian {
    let mut arr = [0.0; PARAMS_PER_GAUSSIAN];
    for v in &mut arr {
        *v = rng.gen_range(-bound..=bound);
    }
    RawGaussian::from_slice(&arr)
}

fn softplus(x: f64) -> f64 {
    (1.0 + x.exp()).ln()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activated Gaussian computed with nalgebra, independent of the crate's 2×2 helpers.
pub struct OracleGaussian {
    pub mu: Vector2<f64>,
    pub cov: Matrix2<f64>,
    pub cov_inv: Matrix2<f64>,
    pub color: [f64; 3],
    pub sigma: f64,
    pub cutoff: f64,
}

pub fn oracle_cov(l: [f64; 3]) -> Matrix2<f64> {
    let lm = Matrix2::new(softplus(l[0]), 0.0, l[1], softplus(l[2]));
    lm * lm.transpose() + Matrix2::identity() * 1e-6
}

pub fn oracle_activate(raw: &RawGaussian, anchor: [f64; 2], scale: [f64; 2]) -> OracleGaussian {
    let cov = oracle_cov(raw.l_params);
    let eig = cov.symmetric_eigenvalues();
    OracleGaussian {
        mu: Vector2::new(
            anchor[0] + raw.mu_bias_raw[0].tanh() * scale[0],
            anchor[1] + raw.mu_bias_raw[1].tanh() * scale[1],
        ),
        cov,
        cov_inv: cov.try_inverse().unwrap(),
        color: raw.color_raw.map(logistic),
        sigma: logistic(raw.sigma_raw),
        cutoff: 3.0 * eig.max().sqrt(),
    }
}

impl OracleGaussian {
    pub fn eval(&self, p: Vector2<f64>, cutoff: bool) -> [f64; 3] {
        let d = p - self.mu;
        if cutoff && d.norm() > self.cutoff {
            return [0.0; 3];
        }
        let q = (d.transpose() * self.cov_inv * d)[(0, 0)];
        let w = self.sigma * (-0.5 * q).exp();
        self.color.map(|c| c * w)
    }
}

/// Per-pixel, per-Gaussian double loop.
pub fn brute_render(set: &GaussianSet, dims: (usize, usize), cutoff: bool) -> ImageBuffer {
    let gs: Vec<_> = (0..set.count())
        .map(|i| oracle_activate(&set.raw(i), set.anchors()[i], set.offset_scale()))
        .collect();
    ImageBuffer::from_fn(dims.0, dims.1, |r, c| {
        let p = Vector2::new(c as f64 + 0.5, r as f64 + 0.5);
        let mut acc = [0.0; 3];
        for g in &gs {
            let v = g.eval(p, cutoff);
            for ch in 0..3 {
                acc[ch] += v[ch];
            }
        }
        acc
    })
}

/// Random scene of `n` Gaussians anchored inside a `dims` canvas, `|raw| <= bound`.
pub fn random_set(rng: &mut ChaCha8Rng, n: usize, dims: (usize, usize), bound: f64) -> GaussianSet {
    let raws: Vec<_> = (0..n).map(|_| random_raw(rng, bound)).collect();
    let anchors = (0..n)
        .map(|_| [rng.gen_range(0.0..dims.1 as f64), rng.gen_range(0.0..dims.0 as f64)])
        .collect();
    GaussianSet::from_raw(&raws, anchors, [2.0, 2.0])
}

pub fn max_abs_diff(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Grid of `rows × cols` cells of size `p` with `per_cell` random Gaussians each.
pub fn random_grid(rng: &mut ChaCha8Rng, rows: usize, cols: usize, p: usize, a: usize, per_cell: usize) -> PatchGrid {
    let geometry = GridGeometry::new(rows * p, cols * p, p, a).unwrap();
    let mut grid = PatchGrid::with_lattice(geometry, per_cell).unwrap();
    for cell in grid.cells_mut() {
        for i in 0..cell.count() {
            let mut raw = random_raw(rng, 3.0);
            // Keep Gaussians large enough to cover several pixels.
            raw.l_params[0] = rng.gen_range(-0.5..2.0);
            raw.l_params[2] = rng.gen_range(-0.5..2.0);
            cell.set_raw(i, &raw);
        }
    }
    grid
}

/// Pixels whose centre lies within `band` pixels of any Gaussian's cutoff circle.
pub fn cutoff_band_mask(grid: &PatchGrid, band: f64) -> MaskBuffer {
    let (h, w) = grid.dims();
    let gs: Vec<_> = grid.cells().iter().flat_map(|c| c.activate_all()).collect();
    MaskBuffer::from_fn(h, w, |r, c| {
        let p = [c as f64 + 0.5, r as f64 + 0.5];
        !gs.iter().any(|g| {
            let d = ((p[0] - g.mu[0]).powi(2) + (p[1] - g.mu[1]).powi(2)).sqrt();
            (d - g.cutoff_radius).abs() < band
        })
    })
}

/// Masked L1 loss of the patchwise render.
pub fn pipeline_loss(grid: &PatchGrid, target: &ImageBuffer, mask: &MaskBuffer) -> f64 {
    masked_recons_loss(&render_patchwise(grid), target, mask).unwrap().value
}

/// Agreement rule for analytic vs finite-difference gradients.
pub fn grad_close(analytic: f64, fd: f64) -> bool {
    if analytic.abs() < 1e-3 {
        (analytic - fd).abs() <= 1e-7
    } else {
        (analytic - fd).abs() <= 1e-4 * analytic.abs()
    }
}
