use crate::error::{Error, Result};
use crate::image::{ImageBuffer, MaskBuffer};

/// A scalar loss and its gradient with respect to the quantity it was computed on.
#[derive(Clone, Debug, PartialEq)]
pub struct LossTerm {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl LossTerm {
    pub fn zero(len: usize) -> Self {
        LossTerm {
            value: 0.0,
            grad: vec![0.0; len],
        }
    }
}

/// Weights of the composite objective `w_recons·L_recons + w_gan·L_gan + w_lpips·L_lpips + w_align·L_align`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub recons: f64,
    pub gan: f64,
    pub lpips: f64,
    pub align: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            recons: 1.0,
            gan: 0.3,
            lpips: 3.0,
            align: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.recons, self.gan, self.lpips, self.align];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig(format!("loss weights must be non-negative: {self:?}")));
        }
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> Self {
        LossWeights {
            recons: self.recons * k,
            gan: self.gan * k,
            lpips: self.lpips * k,
            align: self.align * k,
        }
    }
}

/// Per-term results; absent terms contribute nothing.
#[derive(Clone, Debug, Default)]
pub struct LossParts {
    pub recons: Option<LossTerm>,
    pub gan: Option<LossTerm>,
    pub lpips: Option<LossTerm>,
    pub align: Option<LossTerm>,
}

/// Mean absolute error over observed pixels and its (sub)gradient.
pub fn masked_recons_loss(pred: &ImageBuffer, target: &ImageBuffer, mask: &MaskBuffer) -> Result<LossTerm> {
    target.ensure_dims(pred.dims())?;
    if mask.dims() != pred.dims() {
        return Err(Error::dims(
            format!("{}x{} mask", pred.height(), pred.width()),
            format!("{}x{} mask", mask.height(), mask.width()),
        ));
    }
    let observed = mask.observed_count();
    if observed == 0 {
        return Err(Error::EmptyMask);
    }
    let inv = 1.0 / (observed * 3) as f64;
    let mut grad = vec![0.0; pred.data().len()];
    let mut sum = 0.0;
    for (px, &obs) in mask.bits().iter().enumerate() {
        if !obs {
            continue;
        }
        for k in px * 3..px * 3 + 3 {
            let diff = pred.data()[k] - target.data()[k];
            sum += diff.abs();
            grad[k] = if diff > 0.0 {
                inv
            } else if diff < 0.0 {
                -inv
            } else {
                0.0
            };
        }
    }
    Ok(LossTerm {
        value: sum * inv,
        grad,
    })
}

/// Negative cosine similarity `−⟨c, p⟩ / (|c||p|)` and its gradient with respect to `p`.
pub fn cosine_align_loss(f_pred: &[f64], f_clean: &[f64]) -> Result<LossTerm> {
    if f_pred.len() != f_clean.len() {
        return Err(Error::dims(f_clean.len(), f_pred.len()));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (np, nc) = (norm(f_pred), norm(f_clean));
    for n in [np, nc] {
        if n <= 1e-12 {
            return Err(Error::ZeroNorm(n));
        }
    }
    let dot: f64 = f_pred.iter().zip(f_clean).map(|(a, b)| a * b).sum();
    let cos = dot / (np * nc);
    let grad = f_pred
        .iter()
        .zip(f_clean)
        .map(|(p, c)| -(c / (np * nc) - cos * p / (np * np)))
        .collect();
    Ok(LossTerm { value: -cos, grad })
}

/// Weighted sum of the present terms' values and gradients.
pub fn composite_loss(parts: &LossParts, weights: &LossWeights) -> Result<LossTerm> {
    let terms = [
        (&parts.recons, weights.recons),
        (&parts.gan, weights.gan),
        (&parts.lpips, weights.lpips),
        (&parts.align, weights.align),
    ];
    let len = terms
        .iter()
        .find_map(|(t, _)| t.as_ref().map(|t| t.grad.len()))
        .unwrap_or(0);
    let mut out = LossTerm::zero(len);
    for (term, w) in terms {
        let Some(term) = term else { continue };
        if term.grad.len() != len {
            return Err(Error::dims(len, term.grad.len()));
        }
        out.value += w * term.value;
        for (o, g) in out.grad.iter_mut().zip(&term.grad) {
            *o += w * g;
        }
    }
    Ok(out)
}

/// Anisotropic total variation over neighbour pairs touching a masked-out pixel.
pub fn hidden_tv_loss(pred: &ImageBuffer, mask: &MaskBuffer) -> LossTerm {
    let (h, w) = pred.dims();
    let mut pairs = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let here = r * w + c;
            if c + 1 < w && !(mask.get(r, c) && mask.get(r, c + 1)) {
                pairs.push((here, here + 1));
            }
            if r + 1 < h && !(mask.get(r, c) && mask.get(r + 1, c)) {
                pairs.push((here, here + w));
            }
        }
    }
    let mut out = LossTerm::zero(pred.data().len());
    if pairs.is_empty() {
        return out;
    }
    let inv = 1.0 / (pairs.len() * 3) as f64;
    let d = pred.data();
    for (a, b) in pairs {
        for ch in 0..3 {
            let diff = d[a * 3 + ch] - d[b * 3 + ch];
            out.value += diff.abs() * inv;
            let s = if diff > 0.0 {
                inv
            } else if diff < 0.0 {
                -inv
            } else {
                0.0
            };
            out.grad[a * 3 + ch] += s;
            out.grad[b * 3 + ch] -= s;
        }
    }
    out
}

/// Hook for image-space loss terms whose networks live outside this crate
/// (adversarial, perceptual, feature alignment).
pub trait ImageLoss: Send + Sync {
    /// Returns `None` when the term is inactive.
    fn evaluate(&self, pred: &ImageBuffer, target: &ImageBuffer, mask: &MaskBuffer) -> Result<Option<LossTerm>>;
}

/// Term that is always inactive.
#[derive(Clone, Copy, Debug, Default)]
pub struct Inactive;

impl ImageLoss for Inactive {
    fn evaluate(&self, _: &ImageBuffer, _: &ImageBuffer, _: &MaskBuffer) -> Result<Option<LossTerm>> {
        Ok(None)
    }
}

/// Pluggable non-reconstruction terms. All default to [`Inactive`].
pub struct LossPlugins {
    pub gan: Box<dyn ImageLoss>,
    pub lpips: Box<dyn ImageLoss>,
    pub align: Box<dyn ImageLoss>,
}

impl Default for LossPlugins {
    fn default() -> Self {
        LossPlugins {
            gan: Box::new(Inactive),
            lpips: Box::new(Inactive),
            align: Box::new(Inactive),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> ImageBuffer {
        ImageBuffer::from_fn(h, w, |_, _| [rng.gen(), rng.gen(), rng.gen()])
    }

    #[test]
    fn identical_images_zero_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = random_image(&mut rng, 4, 5);
        let t = masked_recons_loss(&img, &img, &MaskBuffer::full(4, 5)).unwrap();
        assert_eq!(t.value, 0.0);
        assert!(t.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn constant_offset() {
        let target = ImageBuffer::filled(3, 3, [0.2, 0.3, 0.4]);
        let pred = ImageBuffer::filled(3, 3, [0.7, 0.8, 0.9]);
        let t = masked_recons_loss(&pred, &target, &MaskBuffer::full(3, 3)).unwrap();
        assert!((t.value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_mask_is_error() {
        let img = ImageBuffer::zeros(2, 2);
        let mask = MaskBuffer::from_bits(2, 2, vec![false; 4]).unwrap();
        assert!(matches!(masked_recons_loss(&img, &img, &mask), Err(Error::EmptyMask)));
    }

    #[test]
    fn recons_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let pred = random_image(&mut rng, 4, 4);
            let target = random_image(&mut rng, 4, 4);
            let mut mask = MaskBuffer::from_fn(4, 4, |_, _| rng.gen_bool(0.6));
            mask.set(0, 0, true);
            let t = masked_recons_loss(&pred, &target, &mask).unwrap();
            let mut sum = 0.0;
            let mut n = 0.0;
            for r in 0..4 {
                for c in 0..4 {
                    if mask.get(r, c) {
                        for ch in 0..3 {
                            sum += (pred.pixel(r, c)[ch] - target.pixel(r, c)[ch]).abs();
                            n += 1.0;
                        }
                    } else {
                        assert_eq!(&t.grad[pred.index(r, c)..pred.index(r, c) + 3], &[0.0; 3]);
                    }
                }
            }
            assert!((t.value - sum / n).abs() < 1e-7);
        }
    }

    #[test]
    fn hidden_pixels_do_not_affect_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pred = random_image(&mut rng, 6, 6);
        let target = random_image(&mut rng, 6, 6);
        let mask = MaskBuffer::from_fn(6, 6, |r, c| (r + c) % 3 != 0);
        let before = masked_recons_loss(&pred, &target, &mask).unwrap().value;
        for r in 0..6 {
            for c in 0..6 {
                if !mask.get(r, c) {
                    pred.set_pixel(r, c, [rng.gen(), 5.0, -3.0]);
                }
            }
        }
        assert_eq!(masked_recons_loss(&pred, &target, &mask).unwrap().value, before);
    }

    #[test]
    fn cosine_aligned_and_orthogonal() {
        let f = [0.3, -1.2, 2.0, 0.5];
        let t = cosine_align_loss(&f, &f).unwrap();
        assert!((t.value + 1.0).abs() < 1e-12);
        assert!(t.grad.iter().map(|g| g * g).sum::<f64>().sqrt() < 1e-10);
        let o = cosine_align_loss(&[1.0, 0.0], &[0.0, 2.0]).unwrap();
        assert_eq!(o.value, 0.0);
        assert!(matches!(cosine_align_loss(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroNorm(_))));
    }

    #[test]
    fn cosine_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t = cosine_align_loss(&p, &c).unwrap();
        let h = 1e-5;
        for k in 0..16 {
            let mut a = p.clone();
            a[k] += h;
            let mut b = p.clone();
            b[k] -= h;
            let fd = (cosine_align_loss(&a, &c).unwrap().value - cosine_align_loss(&b, &c).unwrap().value) / (2.0 * h);
            assert!((fd - t.grad[k]).abs() <= 1e-6 * t.grad[k].abs().max(1e-3), "{k}");
        }
    }

    #[test]
    fn composite_weighting() {
        let term = |v: f64, g: f64| Some(LossTerm { value: v, grad: vec![g; 3] });
        let parts = LossParts {
            recons: term(0.5, 1.0),
            gan: term(2.0, -1.0),
            lpips: term(0.25, 0.5),
            align: term(-0.75, 2.0),
        };
        let w = LossWeights::default();
        let out = composite_loss(&parts, &w).unwrap();
        assert!((out.value - (0.5 + 0.3 * 2.0 + 3.0 * 0.25 - 0.75)).abs() < 1e-15);
        assert!((out.grad[0] - (1.0 - 0.3 + 1.5 + 2.0)).abs() < 1e-15);

        let doubled = composite_loss(&parts, &w.scaled(2.0)).unwrap();
        assert_eq!(doubled.value, 2.0 * out.value);
        for (d, o) in doubled.grad.iter().zip(&out.grad) {
            assert_eq!(*d, 2.0 * o);
        }

        let only = LossParts { recons: term(0.5, 1.0), ..Default::default() };
        let r = composite_loss(&only, &LossWeights { recons: 1.0, ..w }).unwrap();
        assert_eq!(r, only.recons.clone().unwrap());
    }

    #[test]
    fn tv_vanishes_without_hidden_pixels() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = random_image(&mut rng, 5, 5);
        let t = hidden_tv_loss(&img, &MaskBuffer::full(5, 5));
        assert_eq!(t.value, 0.0);
        let mask = MaskBuffer::from_fn(5, 5, |r, _| r != 2);
        let t = hidden_tv_loss(&img, &mask);
        assert!(t.value > 0.0);
        // Rows far from the hole receive no gradient.
        assert!(t.grad[..5 * 3].iter().all(|&g| g == 0.0));
    }
}
