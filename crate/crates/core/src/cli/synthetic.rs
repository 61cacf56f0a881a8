//! Synthetic targets for evaluation with known ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gaussian::{inverse_softplus, GaussianSet, RawGaussian};
use crate::image::{ImageBuffer, MaskBuffer};
use crate::raster::{render_global, RenderOptions};

/// Renders `count` random smooth Gaussians over a `height × width` canvas.
///
/// Standard deviations span roughly 6–25 % of the shorter side, so the
/// result is smooth at the pixel scale.
pub fn gaussian_scene(height: usize, width: usize, count: usize, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = height.min(width) as f64;
    let mut raws = Vec::with_capacity(count);
    let mut anchors = Vec::with_capacity(count);
    for _ in 0..count {
        let sx = rng.gen_range(0.06..0.25) * side;
        let sy = rng.gen_range(0.06..0.25) * side;
        raws.push(RawGaussian {
            mu_bias_raw: [0.0, 0.0],
            l_params: [inverse_softplus(sx), rng.gen_range(-0.5..0.5) * sx, inverse_softplus(sy)],
            color_raw: [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
            sigma_raw: rng.gen_range(-1.0..0.5),
        });
        anchors.push([rng.gen_range(0.0..width as f64), rng.gen_range(0.0..height as f64)]);
    }
    let set = GaussianSet::from_raw(&raws, anchors, [1.0, 1.0]);
    let mut img = render_global(&set, (height, width), RenderOptions::default());
    img.data_mut().iter_mut().for_each(|v| *v = v.min(1.0));
    img
}

/// Fills hidden pixels with the per-channel mean of the observed pixels.
pub fn mean_fill(image: &ImageBuffer, mask: &MaskBuffer) -> ImageBuffer {
    let mut mean = [0.0; 3];
    let n = mask.observed_count().max(1) as f64;
    for (px, &obs) in mask.bits().iter().enumerate() {
        if obs {
            for ch in 0..3 {
                mean[ch] += image.data()[px * 3 + ch];
            }
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let (h, w) = image.dims();
    ImageBuffer::from_fn(h, w, |r, c| if mask.get(r, c) { image.pixel(r, c) } else { mean })
}
