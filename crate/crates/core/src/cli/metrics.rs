//! PSNR and SSIM restricted to a pixel region.

use crate::error::{Error, Result};
use crate::image::{ImageBuffer, MaskBuffer};

/// Reported PSNR for identical inputs.
pub const PSNR_CAP: f64 = 99.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub psnr: f64,
    /// `None` when no 11×11 window fits entirely inside the region.
    pub ssim: Option<f64>,
}

impl std::fmt::Display for Metrics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.ssim {
            Some(s) => write!(f, "psnr={:.4} ssim={:.6}", self.psnr, s),
            None => write!(f, "psnr={:.4} ssim=n/a", self.psnr),
        }
    }
}

fn check(a: &ImageBuffer, b: &ImageBuffer, region: &MaskBuffer) -> Result<()> {
    b.ensure_dims(a.dims())?;
    if region.dims() != a.dims() {
        return Err(Error::dims(format!("{:?} region", a.dims()), format!("{:?} region", region.dims())));
    }
    if region.observed_count() == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok(())
}

/// PSNR with peak 1.0 over pixels where `region` is set, capped at [`PSNR_CAP`].
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer, region: &MaskBuffer) -> Result<f64> {
    check(a, b, region)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (px, &inside) in region.bits().iter().enumerate() {
        if inside {
            for k in px * 3..px * 3 + 3 {
                let d = a.data()[k] - b.data()[k];
                sum += d * d;
            }
            n += 3;
        }
    }
    let mse = sum / n as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((-10.0 * mse.log10()).min(PSNR_CAP))
}

fn gaussian_window() -> [f64; SSIM_WINDOW * SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - half).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    let mut w = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    for i in 0..SSIM_WINDOW {
        for j in 0..SSIM_WINDOW {
            w[i * SSIM_WINDOW + j] = g[i] * g[j] / (s * s);
        }
    }
    w
}

/// Mean SSIM over channels and over window centres whose full window lies in `region`.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer, region: &MaskBuffer) -> Result<Option<f64>> {
    check(a, b, region)?;
    let (h, w) = a.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Ok(None);
    }
    let window = gaussian_window();
    // Summed-area table of region membership for O(1) full-window tests.
    let mut sat = vec![0usize; (h + 1) * (w + 1)];
    for r in 0..h {
        for c in 0..w {
            sat[(r + 1) * (w + 1) + c + 1] = region.get(r, c) as usize + sat[r * (w + 1) + c + 1]
                + sat[(r + 1) * (w + 1) + c]
                - sat[r * (w + 1) + c];
        }
    }
    let full = SSIM_WINDOW * SSIM_WINDOW;
    let mut total = 0.0;
    let mut count = 0usize;
    for r0 in 0..=h - SSIM_WINDOW {
        for c0 in 0..=w - SSIM_WINDOW {
            let (r1, c1) = (r0 + SSIM_WINDOW, c0 + SSIM_WINDOW);
            let inside = sat[r1 * (w + 1) + c1] + sat[r0 * (w + 1) + c0] - sat[r0 * (w + 1) + c1] - sat[r1 * (w + 1) + c0];
            if inside != full {
                continue;
            }
            for ch in 0..3 {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..SSIM_WINDOW {
                    for j in 0..SSIM_WINDOW {
                        let k = a.index(r0 + i, c0 + j) + ch;
                        let g = window[i * SSIM_WINDOW + j];
                        let (x, y) = (a.data()[k], b.data()[k]);
                        ma += g * x;
                        mb += g * y;
                        saa += g * x * x;
                        sbb += g * y * y;
                        sab += g * x * y;
                    }
                }
                let va = saa - ma * ma;
                let vb = sbb - mb * mb;
                let cov = sab - ma * mb;
                total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                    / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
                count += 1;
            }
        }
    }
    Ok((count > 0).then(|| total / count as f64))
}

pub fn compute_metrics(a: &ImageBuffer, b: &ImageBuffer, region: &MaskBuffer) -> Result<Metrics> {
    Ok(Metrics {
        psnr: psnr(a, b, region)?,
        ssim: ssim(a, b, region)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_images() {
        let img = ImageBuffer::from_fn(16, 16, |r, c| [r as f64 / 16.0, c as f64 / 16.0, 0.3]);
        let m = compute_metrics(&img, &img, &MaskBuffer::full(16, 16)).unwrap();
        assert_eq!(m.psnr, PSNR_CAP);
        assert!((m.ssim.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_offset_is_20db() {
        let a = ImageBuffer::filled(8, 8, [0.2, 0.4, 0.6]);
        let b = ImageBuffer::filled(8, 8, [0.3, 0.5, 0.7]);
        let p = psnr(&a, &b, &MaskBuffer::full(8, 8)).unwrap();
        assert!((p - 20.0).abs() < 1e-9);
    }

    #[test]
    fn empty_region_is_error() {
        let a = ImageBuffer::zeros(4, 4);
        let empty = MaskBuffer::from_bits(4, 4, vec![false; 16]).unwrap();
        assert!(matches!(compute_metrics(&a, &a, &empty), Err(Error::EmptyRegion)));
    }

    #[test]
    fn region_without_full_window_has_no_ssim() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = ImageBuffer::from_fn(20, 20, |_, _| [rng.gen(), rng.gen(), rng.gen()]);
        let region = MaskBuffer::from_fn(20, 20, |r, _| r % 2 == 0);
        assert_eq!(ssim(&a, &a, &region).unwrap(), None);
    }
}
