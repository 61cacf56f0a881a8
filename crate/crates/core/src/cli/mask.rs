//! Synthetic mask generation.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::MaskBuffer;

/// Small-mask range: 20–40 % of pixels hidden.
pub const SMALL_MASK: (f64, f64) = (0.2, 0.4);
/// Large-mask range: 40–60 % of pixels hidden.
pub const LARGE_MASK: (f64, f64) = (0.4, 0.6);

/// Achieved hidden ratios may overshoot the requested range by this much.
pub const RATIO_SLACK: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskKind {
    /// Random-walk brush strokes.
    Irregular,
    /// Axis-aligned rectangles.
    Regular,
}

impl FromStr for MaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "irregular" => Ok(MaskKind::Irregular),
            "regular" => Ok(MaskKind::Regular),
            other => Err(Error::InvalidConfig(format!("unknown mask kind '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaskSpec {
    pub ratio: (f64, f64),
    pub kind: MaskKind,
    /// Brush radius in pixels; defaults to `max(1, min(H, W) / 32)`.
    pub brush_radius: Option<usize>,
    pub seed: u64,
}

/// Marks pixels hidden one at a time until `goal` pixels are hidden.
struct Painter {
    mask: MaskBuffer,
    hidden: usize,
    goal: usize,
}

impl Painter {
    fn done(&self) -> bool {
        self.hidden >= self.goal
    }

    fn hide(&mut self, row: usize, col: usize) {
        if !self.done() && self.mask.get(row, col) {
            self.mask.set(row, col, false);
            self.hidden += 1;
        }
    }

    fn disc(&mut self, cx: f64, cy: f64, radius: f64) {
        let (h, w) = self.mask.dims();
        let r0 = (cy - radius).floor().max(0.0) as usize;
        let r1 = ((cy + radius).ceil() as usize).min(h - 1);
        let c0 = (cx - radius).floor().max(0.0) as usize;
        let c1 = ((cx + radius).ceil() as usize).min(w - 1);
        for r in r0..=r1 {
            for c in c0..=c1 {
                let dx = c as f64 + 0.5 - cx;
                let dy = r as f64 + 0.5 - cy;
                if dx * dx + dy * dy <= radius * radius {
                    self.hide(r, c);
                }
            }
        }
    }
}

/// Generates a mask whose hidden fraction lies in `ratio` (within ±1 %).
pub fn gen_mask(dims: (usize, usize), spec: &MaskSpec) -> Result<MaskBuffer> {
    let (h, w) = dims;
    let (lo, hi) = spec.ratio;
    if !(lo > 0.0 && lo <= hi && hi < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "mask ratio range must satisfy 0 < lo <= hi < 1, got ({lo}, {hi})"
        )));
    }
    if h == 0 || w == 0 {
        return Err(Error::InvalidConfig("mask dimensions must be positive".into()));
    }
    let radius = spec.brush_radius.unwrap_or((h.min(w) / 32).max(1));
    if spec.kind == MaskKind::Irregular && (radius == 0 || 2 * radius > h.min(w)) {
        return Err(Error::UnreachableRatio(format!(
            "brush radius {radius} does not fit a {h}x{w} image"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total = h * w;
    let ratio = rng.gen_range(lo..=hi);
    let goal = (ratio * total as f64).round() as usize;
    let achieved = goal as f64 / total as f64;
    if achieved < lo - RATIO_SLACK || achieved > hi + RATIO_SLACK || goal == 0 || goal >= total {
        return Err(Error::UnreachableRatio(format!(
            "cannot hide a fraction in [{lo}, {hi}] of a {h}x{w} image"
        )));
    }

    let mut painter = Painter {
        mask: MaskBuffer::full(h, w),
        hidden: 0,
        goal,
    };
    // Each shape hides at least one new pixel with positive probability; the cap
    // only guards against pathological inputs.
    let max_shapes = 100 * total;
    let mut shapes = 0;
    while !painter.done() {
        shapes += 1;
        if shapes > max_shapes {
            return Err(Error::UnreachableRatio("mask generation did not converge".into()));
        }
        match spec.kind {
            MaskKind::Irregular => stroke(&mut painter, &mut rng, radius as f64),
            MaskKind::Regular => rectangle(&mut painter, &mut rng),
        }
    }
    Ok(painter.mask)
}

fn stroke(painter: &mut Painter, rng: &mut ChaCha8Rng, radius: f64) {
    let (h, w) = painter.mask.dims();
    let (hf, wf) = (h as f64, w as f64);
    let mut x = rng.gen_range(0.0..wf);
    let mut y = rng.gen_range(0.0..hf);
    let mut angle = rng.gen_range(0.0..2.0 * PI);
    let vertices = rng.gen_range(4..=12);
    painter.disc(x, y, radius);
    for _ in 0..vertices {
        angle += rng.gen_range(-PI / 3.0..PI / 3.0);
        let len = rng.gen_range(radius..=4.0 * radius);
        let nx = (x + len * angle.cos()).clamp(0.0, wf);
        let ny = (y + len * angle.sin()).clamp(0.0, hf);
        let steps = (len / (0.5 * radius).max(0.5)).ceil() as usize;
        for k in 1..=steps {
            let t = k as f64 / steps as f64;
            painter.disc(x + t * (nx - x), y + t * (ny - y), radius);
        }
        x = nx;
        y = ny;
        if painter.done() {
            return;
        }
    }
}

fn rectangle(painter: &mut Painter, rng: &mut ChaCha8Rng) {
    let (h, w) = painter.mask.dims();
    let rh = rng.gen_range((h / 8).max(1)..=(h / 3).max(1));
    let rw = rng.gen_range((w / 8).max(1)..=(w / 3).max(1));
    let r0 = rng.gen_range(0..=h - rh);
    let c0 = rng.gen_range(0..=w - rw);
    for r in r0..r0 + rh {
        for c in c0..c0 + rw {
            painter.hide(r, c);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: MaskKind, ratio: (f64, f64), seed: u64) -> MaskSpec {
        MaskSpec {
            ratio,
            kind,
            brush_radius: None,
            seed,
        }
    }

    #[test]
    fn small_mask_ratio_holds() {
        for seed in 0..20 {
            for kind in [MaskKind::Irregular, MaskKind::Regular] {
                let m = gen_mask((64, 48), &spec(kind, SMALL_MASK, seed)).unwrap();
                let r = m.hidden_ratio();
                assert!((0.19..=0.41).contains(&r), "{kind:?} seed {seed}: {r}");
            }
        }
    }

    #[test]
    fn degenerate_ranges_rejected() {
        assert!(gen_mask((32, 32), &spec(MaskKind::Irregular, (0.0, 1e-9), 0)).is_err());
        assert!(gen_mask((32, 32), &spec(MaskKind::Irregular, (0.5, 0.4), 0)).is_err());
        assert!(gen_mask((32, 32), &spec(MaskKind::Regular, (0.3, 1.0), 0)).is_err());
        let big_brush = MaskSpec {
            brush_radius: Some(20),
            ..spec(MaskKind::Irregular, SMALL_MASK, 0)
        };
        assert!(matches!(gen_mask((32, 32), &big_brush), Err(Error::UnreachableRatio(_))));
        // 2x2 image: reachable fractions are multiples of 0.25.
        assert!(matches!(
            gen_mask((2, 2), &spec(MaskKind::Regular, (0.1, 0.12), 0)),
            Err(Error::UnreachableRatio(_))
        ));
    }

    #[test]
    fn seeded_masks_replay() {
        let s = spec(MaskKind::Irregular, LARGE_MASK, 42);
        assert_eq!(gen_mask((40, 40), &s).unwrap(), gen_mask((40, 40), &s).unwrap());
        let other = spec(MaskKind::Irregular, LARGE_MASK, 43);
        assert_ne!(gen_mask((40, 40), &s).unwrap(), gen_mask((40, 40), &other).unwrap());
    }

    #[test]
    fn parses_kind() {
        assert_eq!("regular".parse::<MaskKind>().unwrap(), MaskKind::Regular);
        assert!("blob".parse::<MaskKind>().is_err());
    }
}
