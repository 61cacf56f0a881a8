mod common;

use common::rng;
use rand::Rng;

use splat_inpaint::cli::metrics::psnr;
use splat_inpaint::optim::{
    fit, fit_with_plugins, initialize_grid, write_trace_csv, FitConfig, ImageLoss, LossPlugins, LossTerm,
    MaskSchedule,
};
use splat_inpaint::raster::render_patchwise;
use splat_inpaint::{GridGeometry, ImageBuffer, MaskBuffer, Result};

fn radial_target(n: usize) -> ImageBuffer {
    ImageBuffer::from_fn(n, n, |r, c| {
        let (x, y) = (c as f64 + 0.5 - 32.0, r as f64 + 0.5 - 32.0);
        let d = ((x * x + y * y).sqrt() / 45.0).min(1.0);
        [0.9 - 0.8 * d, 0.2 + 0.6 * d, 0.5]
    })
}

#[test]
fn rendered_target_is_a_fixed_point() {
    let mut r = rng(41);
    let grid = common::random_grid(&mut r, 2, 2, 8, 1, 4);
    let target = render_patchwise(&grid);
    let mask = MaskBuffer::full(16, 16);
    let out = fit(grid.clone(), &target, &mask, &FitConfig { steps: 5, ..Default::default() }).unwrap();
    assert_eq!(out.grid, grid);
    assert!(out.trace.iter().all(|row| row.total == 0.0));
}

#[test]
fn radial_gradient_fit_reduces_loss_tenfold() {
    let target = radial_target(64);
    let mask = MaskBuffer::full(64, 64);
    let geometry = GridGeometry::new(64, 64, 16, 1).unwrap();
    let grid = initialize_grid(geometry, 324, &target, &mask).unwrap();
    let out = fit(grid, &target, &mask, &FitConfig::default()).unwrap();
    assert_eq!(out.trace.len(), 2001);
    assert!(out.final_loss() <= 0.1 * out.initial_loss(), "{} vs {}", out.final_loss(), out.initial_loss());
    let quality = psnr(&render_patchwise(&out.grid), &target, &mask).unwrap();
    assert!(quality >= 40.0, "psnr {quality}");
}

fn scheduled_config(seed: u64) -> FitConfig {
    FitConfig {
        steps: 40,
        lr: 1e-2,
        seed,
        tv_weight: 0.1,
        mask_schedule: Some(MaskSchedule { start: 0.1, end: 0.4, increment: 0.1, every: 10 }),
        ..Default::default()
    }
}

fn small_problem() -> (splat_inpaint::PatchGrid, ImageBuffer, MaskBuffer) {
    let target = splat_inpaint::cli::synthetic::gaussian_scene(32, 32, 6, 3);
    let mask = MaskBuffer::from_fn(32, 32, |r, c| !(8..20).contains(&r) || !(10..22).contains(&c));
    let geometry = GridGeometry::new(32, 32, 16, 1).unwrap();
    let grid = initialize_grid(geometry, 16, &target, &mask).unwrap();
    (grid, target, mask)
}

#[test]
fn fits_are_reproducible_for_a_seed() {
    let (grid, target, mask) = small_problem();
    let a = fit(grid.clone(), &target, &mask, &scheduled_config(7)).unwrap();
    let b = fit(grid.clone(), &target, &mask, &scheduled_config(7)).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.grid, b.grid);
    let c = fit(grid, &target, &mask, &scheduled_config(8)).unwrap();
    assert_ne!(a.trace, c.trace);
}

#[test]
fn hidden_pixels_do_not_influence_the_fit_without_tv() {
    let (grid, target, mask) = small_problem();
    let mut scrambled = target.clone();
    let mut r = rng(42);
    for row in 0..32 {
        for col in 0..32 {
            if !mask.get(row, col) {
                scrambled.set_pixel(row, col, [r.gen(), r.gen(), r.gen()]);
            }
        }
    }
    let cfg = FitConfig { steps: 20, lr: 1e-2, ..Default::default() };
    let a = fit(grid.clone(), &target, &mask, &cfg).unwrap();
    let b = fit(grid, &scrambled, &mask, &cfg).unwrap();
    assert_eq!(a.grid, b.grid);
}

#[test]
fn fit_rejects_bad_inputs() {
    let (grid, target, _) = small_problem();
    let cfg = FitConfig { steps: 1, ..Default::default() };
    assert!(fit(grid.clone(), &target, &MaskBuffer::from_fn(32, 32, |_, _| false), &cfg).is_err());
    assert!(fit(grid.clone(), &ImageBuffer::zeros(16, 32), &MaskBuffer::full(32, 32), &cfg).is_err());
    let bad = FitConfig { lr: -1.0, ..cfg };
    assert!(fit(grid, &target, &MaskBuffer::full(32, 32), &bad).is_err());
}

/// Mean of the prediction, pulled towards zero.
struct MeanPenalty;

impl ImageLoss for MeanPenalty {
    fn evaluate(&self, pred: &ImageBuffer, _: &ImageBuffer, _: &MaskBuffer) -> Result<Option<LossTerm>> {
        let n = pred.data().len() as f64;
        Ok(Some(LossTerm {
            value: pred.data().iter().sum::<f64>() / n,
            grad: vec![1.0 / n; pred.data().len()],
        }))
    }
}

#[test]
fn plugin_terms_enter_trace_with_their_weight() {
    let (grid, target, mask) = small_problem();
    let plugins = LossPlugins { gan: Box::new(MeanPenalty), ..Default::default() };
    let cfg = FitConfig { steps: 3, ..Default::default() };
    let out = fit_with_plugins(grid, &target, &mask, &cfg, &plugins).unwrap();
    for row in &out.trace {
        assert!(row.gan > 0.0);
        assert_eq!(row.lpips, 0.0);
        assert!((row.total - (row.recons + 0.3 * row.gan)).abs() < 1e-12);
    }
    let mut csv = Vec::new();
    write_trace_csv(&out.trace, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("step,total,recons,gan,lpips,align,tv\n"));
    assert_eq!(text.lines().count(), 5);
}
