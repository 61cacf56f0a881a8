use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, clip_global_norm, OptimState, DEFAULT_LR};
use super::loss::{composite_loss, hidden_tv_loss, masked_recons_loss, LossParts, LossPlugins, LossWeights};
use crate::error::{Error, Result};
use crate::grad::backward_render_with;
use crate::image::{ImageBuffer, MaskBuffer};
use crate::raster::{render_patchwise_with, BlendLayout, PatchGrid};

/// Progressively harder loss-mask dropout for fitting.
///
/// The dropped fraction starts at `start`, grows by `increment` every
/// `every` steps until it reaches `end`, then is sampled uniformly from
/// `[start, end]` at each step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaskSchedule {
    pub start: f64,
    pub end: f64,
    pub increment: f64,
    pub every: usize,
}

impl MaskSchedule {
    pub fn ratio_at(&self, step: usize, rng: &mut impl Rng) -> f64 {
        let ramped = self.start + self.increment * (step / self.every.max(1)) as f64;
        if ramped < self.end {
            ramped
        } else {
            rng.gen_range(self.start..=self.end)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..1.0).contains(&self.start)
            && (self.start..1.0).contains(&self.end)
            && self.increment > 0.0
            && self.every > 0;
        if !ok {
            return Err(Error::InvalidConfig(format!("bad mask schedule {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub steps: usize,
    pub lr: f64,
    pub weights: LossWeights,
    /// Global gradient-norm ceiling applied before each update.
    pub clip_norm: Option<f64>,
    /// Weight of the total-variation term over hidden pixels.
    pub tv_weight: f64,
    pub seed: u64,
    pub workers: usize,
    pub mask_schedule: Option<MaskSchedule>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            steps: 2000,
            lr: DEFAULT_LR,
            weights: LossWeights::default(),
            clip_norm: Some(10.0),
            tv_weight: 0.0,
            seed: 0,
            workers: 1,
            mask_schedule: None,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.tv_weight < 0.0 || !self.tv_weight.is_finite() {
            return Err(Error::InvalidConfig("tv weight must be non-negative".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        if let Some(s) = &self.mask_schedule {
            s.validate()?;
        }
        Ok(())
    }
}

/// Loss values recorded at one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub total: f64,
    pub recons: f64,
    pub gan: f64,
    pub lpips: f64,
    pub align: f64,
    pub tv: f64,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub grid: PatchGrid,
    /// Row `k < steps` is the loss at which update `k` was taken; the last row
    /// is the loss after the final update.
    pub trace: Vec<TraceRow>,
}

impl FitResult {
    pub fn initial_loss(&self) -> f64 {
        self.trace.first().map_or(f64::NAN, |r| r.total)
    }

    pub fn final_loss(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.total)
    }
}

pub fn write_trace_csv(trace: &[TraceRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "step,total,recons,gan,lpips,align,tv")?;
    for r in trace {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.step, r.total, r.recons, r.gan, r.lpips, r.align, r.tv
        )?;
    }
    Ok(())
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Fits `grid` to the observed pixels of `target`.
pub fn fit(grid: PatchGrid, target: &ImageBuffer, mask: &MaskBuffer, config: &FitConfig) -> Result<FitResult> {
    fit_with_plugins(grid, target, mask, config, &LossPlugins::default())
}

pub fn fit_with_plugins(
    grid: PatchGrid,
    target: &ImageBuffer,
    mask: &MaskBuffer,
    config: &FitConfig,
    plugins: &LossPlugins,
) -> Result<FitResult> {
    config.validate()?;
    target.ensure_dims(grid.dims())?;
    if mask.dims() != grid.dims() {
        return Err(Error::dims(
            format!("{:?} mask", grid.dims()),
            format!("{:?} mask", mask.dims()),
        ));
    }
    if mask.observed_count() == 0 {
        return Err(Error::EmptyMask);
    }
    with_workers(config.workers, || run(grid, target, mask, config, plugins))?
}

fn gather(grid: &PatchGrid, out: &mut Vec<f64>) {
    out.clear();
    for cell in grid.cells() {
        out.extend_from_slice(cell.params());
    }
}

fn scatter(grid: &mut PatchGrid, flat: &[f64]) {
    let mut offset = 0;
    for cell in grid.cells_mut() {
        let n = cell.params().len();
        cell.params_mut().copy_from_slice(&flat[offset..offset + n]);
        offset += n;
    }
}

fn dropout_mask(mask: &MaskBuffer, ratio: f64, rng: &mut ChaCha8Rng) -> MaskBuffer {
    let (h, w) = mask.dims();
    let dropped = MaskBuffer::from_fn(h, w, |r, c| mask.get(r, c) && !rng.gen_bool(ratio));
    if dropped.observed_count() == 0 {
        mask.clone()
    } else {
        dropped
    }
}

fn run(
    mut grid: PatchGrid,
    target: &ImageBuffer,
    mask: &MaskBuffer,
    config: &FitConfig,
    plugins: &LossPlugins,
) -> Result<FitResult> {
    let layout = BlendLayout::new(grid.geometry());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = OptimState::new(grid.param_count(), config.lr);
    let mut flat = Vec::with_capacity(grid.param_count());
    let mut flat_grad = Vec::with_capacity(grid.param_count());
    let mut trace = Vec::with_capacity(config.steps + 1);

    for step in 0..=config.steps {
        let pred = render_patchwise_with(&grid, &layout);
        let step_mask = match &config.mask_schedule {
            Some(s) if step < config.steps => {
                let ratio = s.ratio_at(step, &mut rng);
                dropout_mask(mask, ratio, &mut rng)
            }
            _ => mask.clone(),
        };
        let parts = LossParts {
            recons: Some(masked_recons_loss(&pred, target, &step_mask)?),
            gan: plugins.gan.evaluate(&pred, target, &step_mask)?,
            lpips: plugins.lpips.evaluate(&pred, target, &step_mask)?,
            align: plugins.align.evaluate(&pred, target, &step_mask)?,
        };
        let mut total = composite_loss(&parts, &config.weights)?;
        let tv = if config.tv_weight > 0.0 {
            let tv = hidden_tv_loss(&pred, mask);
            total.value += config.tv_weight * tv.value;
            for (g, t) in total.grad.iter_mut().zip(&tv.grad) {
                *g += config.tv_weight * t;
            }
            tv.value
        } else {
            0.0
        };
        let value = |t: &Option<super::loss::LossTerm>| t.as_ref().map_or(0.0, |t| t.value);
        trace.push(TraceRow {
            step,
            total: total.value,
            recons: value(&parts.recons),
            gan: value(&parts.gan),
            lpips: value(&parts.lpips),
            align: value(&parts.align),
            tv,
        });
        if step == config.steps {
            break;
        }

        let (h, w) = grid.dims();
        let upstream = ImageBuffer::from_vec(h, w, total.grad)?;
        let grads = backward_render_with(&grid, &layout, &upstream);
        flat_grad.clear();
        for g in &grads {
            flat_grad.extend_from_slice(g.values());
        }
        if let Some(max) = config.clip_norm {
            clip_global_norm(&mut flat_grad, max);
        }
        gather(&grid, &mut flat);
        adam_step(&mut flat, &flat_grad, &mut state)?;
        scatter(&mut grid, &flat);
    }
    Ok(FitResult { grid, trace })
}
