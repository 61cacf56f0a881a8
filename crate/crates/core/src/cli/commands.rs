//! Implementations behind the command-line subcommands.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::image::{ImageBuffer, MaskBuffer};
use crate::optim::{fit, initialize_grid, with_workers, write_trace_csv, FitResult};
use crate::raster::{render_global, render_patchwise, working_set, GridGeometry, PatchGrid, RenderOptions};

use super::config::RunConfig;
use super::mask::{gen_mask, MaskSpec};
use super::metrics::{compute_metrics, psnr, Metrics};
use super::params_io::{self, ParamFile};
use super::synthetic::{gaussian_scene, mean_fill};

/// Ordered `key=value` report.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report(pub Vec<(String, String)>);

impl Report {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn push_metrics(&mut self, prefix: &str, m: &Metrics) {
        self.push(&format!("{prefix}_psnr"), format!("{:.6}", m.psnr));
        match m.ssim {
            Some(s) => self.push(&format!("{prefix}_ssim"), format!("{s:.6}")),
            None => self.push(&format!("{prefix}_ssim"), "n/a"),
        }
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.0 {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Result of fitting an image (or its observed part).
#[derive(Clone, Debug)]
pub struct Fitted {
    pub fit: FitResult,
    /// Render of the fitted grid cropped to the input size.
    pub render: ImageBuffer,
    pub height: usize,
    pub width: usize,
}

/// Pads, initializes and fits. Parameters are rounded to `f32` afterwards so
/// the render matches what a saved parameter file reproduces.
pub fn fit_image(image: &ImageBuffer, mask: &MaskBuffer, cfg: &RunConfig) -> Result<Fitted> {
    cfg.validate()?;
    if mask.dims() != image.dims() {
        return Err(Error::dims(
            format!("{}x{} mask", image.height(), image.width()),
            format!("{}x{} mask", mask.height(), mask.width()),
        ));
    }
    if mask.observed_count() == 0 {
        return Err(Error::EmptyMask);
    }
    let (height, width) = image.dims();
    let geometry = GridGeometry::covering(height, width, cfg.patch_size, cfg.overlap_pad)?;
    let (ph, pw) = geometry.dims();
    let target = image.reflect_pad(ph, pw);
    let padded_mask = mask.pad(ph, pw);
    let grid = initialize_grid(geometry, cfg.gaussians_per_patch, &target, &padded_mask)?;
    let mut result = fit(grid, &target, &padded_mask, &cfg.fit_config())?;
    params_io::quantize_to_f32(&mut result.grid);
    let render = with_workers(cfg.workers, || render_patchwise(&result.grid))?.crop(height, width);
    Ok(Fitted {
        fit: result,
        render,
        height,
        width,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_outputs(out_dir: &Path, fitted: &Fitted, image_name: &str, report: &Report) -> Result<()> {
    create_dir(out_dir)?;
    let file = ParamFile {
        height: fitted.height,
        width: fitted.width,
        grid: fitted.fit.grid.clone(),
    };
    params_io::save(&out_dir.join("params.gs2d"), &file)?;
    fitted.render.save(&out_dir.join(image_name))?;
    let trace_path = out_dir.join("trace.csv");
    let f = File::create(&trace_path).map_err(|e| Error::io(&trace_path, e))?;
    let mut w = BufWriter::new(f);
    write_trace_csv(&fitted.fit.trace, &mut w).map_err(|e| Error::io(&trace_path, e))?;
    w.flush().map_err(|e| Error::io(&trace_path, e))?;
    write_text(&out_dir.join("report.txt"), &report.to_string())
}

fn fit_report(command: &str, fitted: &Fitted, cfg: &RunConfig) -> Report {
    let mut r = Report::default();
    r.push("command", command);
    r.push("height", fitted.height);
    r.push("width", fitted.width);
    r.push("gaussians", fitted.fit.grid.total_gaussians());
    r.push("steps", cfg.steps);
    r.push("seed", cfg.seed);
    r.push("initial_loss", format!("{:e}", fitted.fit.initial_loss()));
    r.push("final_loss", format!("{:e}", fitted.fit.final_loss()));
    r
}

/// Fits every pixel of an image and writes parameters, reconstruction, trace and report.
pub fn cmd_fit(image_path: &Path, out_dir: &Path, cfg: &RunConfig) -> Result<Report> {
    let image = ImageBuffer::load(image_path)?;
    let mask = MaskBuffer::full(image.height(), image.width());
    let fitted = fit_image(&image, &mask, cfg)?;
    let mut report = fit_report("fit", &fitted, cfg);
    report.push_metrics("recon", &compute_metrics(&fitted.render, &image, &mask)?);
    write_outputs(out_dir, &fitted, "reconstruction.png", &report)?;
    Ok(report)
}

#[derive(Clone, Debug)]
pub enum MaskSource {
    File(PathBuf),
    Generate(MaskSpec),
}

#[derive(Clone, Debug)]
pub struct InpaintJob {
    pub image: PathBuf,
    pub mask: MaskSource,
    /// Ground truth for hidden-region metrics. When the mask is generated the
    /// input image itself is the ground truth.
    pub ground_truth: Option<PathBuf>,
    pub out_dir: PathBuf,
}

/// Inpaints in memory; returns the fitted result and its report.
pub fn inpaint_image(
    image: &ImageBuffer,
    mask: &MaskBuffer,
    ground_truth: Option<&ImageBuffer>,
    cfg: &RunConfig,
) -> Result<(Fitted, Report)> {
    if mask.dims() != image.dims() {
        return Err(Error::dims(
            format!("{}x{} mask", image.height(), image.width()),
            format!("{}x{} mask", mask.height(), mask.width()),
        ));
    }
    let fitted = fit_image(image, mask, cfg)?;
    let mut report = fit_report("inpaint", &fitted, cfg);
    report.push("hidden_ratio", format!("{:.6}", mask.hidden_ratio()));
    // Observed-region fidelity is measured against the input pixels.
    report.push_metrics("observed_vs_input", &compute_metrics(&fitted.render, image, mask)?);
    let hidden = mask.inverted();
    match ground_truth {
        Some(gt) if hidden.observed_count() > 0 => {
            gt.ensure_dims(image.dims())?;
            report.push_metrics("hidden_vs_truth", &compute_metrics(&fitted.render, gt, &hidden)?);
            let baseline = psnr(&mean_fill(image, mask), gt, &hidden)?;
            report.push("hidden_mean_fill_psnr", format!("{baseline:.6}"));
        }
        _ => {
            report.push("hidden_vs_truth_psnr", "n/a");
            report.push("hidden_vs_truth_ssim", "n/a");
        }
    }
    Ok((fitted, report))
}

pub fn cmd_inpaint(job: &InpaintJob, cfg: &RunConfig) -> Result<Report> {
    let image = ImageBuffer::load(&job.image)?;
    let (mask, generated) = match &job.mask {
        MaskSource::File(p) => (MaskBuffer::load(p)?, false),
        MaskSource::Generate(spec) => (gen_mask(image.dims(), spec)?, true),
    };
    let truth = match &job.ground_truth {
        Some(p) => Some(ImageBuffer::load(p)?),
        None if generated => Some(image.clone()),
        None => None,
    };
    let (fitted, report) = inpaint_image(&image, &mask, truth.as_ref(), cfg)?;
    write_outputs(&job.out_dir, &fitted, "inpainted.png", &report)?;
    if generated {
        mask.save(&job.out_dir.join("mask.png"))?;
    }
    Ok(report)
}

pub fn cmd_genmask(dims: (usize, usize), spec: &MaskSpec, out: &Path) -> Result<MaskBuffer> {
    let mask = gen_mask(dims, spec)?;
    mask.save(out)?;
    Ok(mask)
}

/// Metrics between two images over an optional region (default: all pixels).
pub fn cmd_metrics(a: &Path, b: &Path, region: Option<&Path>) -> Result<Metrics> {
    let a = ImageBuffer::load(a)?;
    let b = ImageBuffer::load(b)?;
    let region = match region {
        Some(p) => MaskBuffer::load(p)?,
        None => MaskBuffer::full(a.height(), a.width()),
    };
    compute_metrics(&a, &b, &region)
}

/// Sweep definition for the rasterization benchmark.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchSpec {
    pub sizes: Vec<(usize, usize)>,
    pub per_patch: Vec<usize>,
    pub workers: Vec<usize>,
    pub runs: usize,
    pub patch_size: usize,
    pub overlap_pad: usize,
    pub seed: u64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            sizes: vec![(64, 64), (128, 128)],
            per_patch: vec![324],
            workers: vec![1, 2, 4],
            runs: 5,
            patch_size: 16,
            overlap_pad: 1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub mode: &'static str,
    pub height: usize,
    pub width: usize,
    pub cells: usize,
    pub per_patch: usize,
    pub total_gaussians: usize,
    pub workers: usize,
    pub median_ms: f64,
    /// Gaussians resident at once while rendering one unit of output.
    pub working_set: usize,
    /// Patch mode: output bit-identical to the single-worker render.
    pub matches_single_worker: bool,
}

pub const BENCH_HEADER: &str =
    "mode,height,width,cells,per_patch,total_gaussians,workers,median_ms,working_set,matches_single_worker";

impl fmt::Display for BenchRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{},{},{:.4},{},{}",
            self.mode,
            self.height,
            self.width,
            self.cells,
            self.per_patch,
            self.total_gaussians,
            self.workers,
            self.median_ms,
            self.working_set,
            self.matches_single_worker
        )
    }
}

fn median_ms(runs: usize, mut f: impl FnMut()) -> f64 {
    let mut times: Vec<f64> = (0..runs.max(5))
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times[times.len() / 2]
}

fn bench_grid(h: usize, w: usize, per_patch: usize, spec: &BenchSpec) -> Result<PatchGrid> {
    let geometry = GridGeometry::new(h, w, spec.patch_size, spec.overlap_pad)?;
    let target = gaussian_scene(h, w, 20, spec.seed);
    initialize_grid(geometry, per_patch, &target, &MaskBuffer::full(h, w))
}

/// Times global and patch-level rendering of identical Gaussian totals.
pub fn cmd_bench(spec: &BenchSpec) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &(h, w) in &spec.sizes {
        for &per_patch in &spec.per_patch {
            let grid = bench_grid(h, w, per_patch, spec)?;
            let ws = working_set(&grid);
            let union = grid.union();
            let cells = grid.geometry().cell_count();
            let row = |mode, workers, median_ms, working_set, matches| BenchRow {
                mode,
                height: h,
                width: w,
                cells,
                per_patch,
                total_gaussians: ws.global,
                workers,
                median_ms,
                working_set,
                matches_single_worker: matches,
            };

            let t = median_ms(spec.runs, || {
                std::hint::black_box(render_global(&union, (h, w), RenderOptions::default()));
            });
            rows.push(row("global", 1, t, ws.global, true));

            let reference = with_workers(1, || render_patchwise(&grid))?;
            for &workers in &spec.workers {
                let (t, out) = with_workers(workers, || {
                    let t = median_ms(spec.runs, || {
                        std::hint::black_box(render_patchwise(&grid));
                    });
                    (t, render_patchwise(&grid))
                })?;
                rows.push(row("patch", workers, t, ws.patch, out == reference));
            }
        }
    }
    Ok(rows)
}

pub fn write_bench_csv(rows: &[BenchRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{BENCH_HEADER}")?;
    for r in rows {
        writeln!(out, "{r}")?;
    }
    Ok(())
}
