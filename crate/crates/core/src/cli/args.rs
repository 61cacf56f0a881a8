use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Result;

use super::commands::{
    cmd_bench, cmd_fit, cmd_genmask, cmd_inpaint, cmd_metrics, write_bench_csv, BenchSpec, InpaintJob, MaskSource,
};
use super::config::RunConfig;
use super::mask::MaskSpec;

#[derive(Debug, Parser)]
#[command(name = "splat-inpaint", version, about = "Patch-level 2D Gaussian splatting for image fitting and inpainting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit Gaussians to every pixel of an image.
    Fit {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Fill masked-out pixels by fitting Gaussians to the observed ones.
    ///
    /// Unlike an encoder that sees only the masked image, direct fitting needs
    /// the binary mask to restrict the loss: pass --mask (white = observed) or
    /// --generate-mask to synthesize one from the configured ratio range.
    Inpaint {
        #[arg(long)]
        image: PathBuf,
        #[arg(long, conflicts_with = "generate_mask")]
        mask: Option<PathBuf>,
        /// Generate a mask of this kind (irregular or regular) using mask_ratio and seed.
        #[arg(long)]
        generate_mask: Option<String>,
        /// Reference image for hidden-region metrics.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Compare global and patch-level rendering time and working set.
    Bench {
        /// Image sizes as HxW, comma-separated.
        #[arg(long, default_value = "64x64,128x128")]
        sizes: String,
        #[arg(long, default_value = "324")]
        per_patch: String,
        #[arg(long, default_value = "1,2,4")]
        workers: String,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long, default_value_t = 16)]
        patch_size: usize,
        #[arg(long, default_value_t = 1)]
        overlap_pad: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic mask PNG (white = observed).
    Genmask {
        #[arg(long)]
        height: usize,
        #[arg(long)]
        width: usize,
        /// Hidden-fraction range as lo,hi.
        #[arg(long, default_value = "0.2,0.4")]
        ratio: String,
        #[arg(long, default_value = "irregular")]
        kind: String,
        #[arg(long)]
        brush_radius: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// PSNR and SSIM between two images, optionally within a mask region.
    Metrics {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        region: Option<PathBuf>,
    },
}

/// Run configuration flags; each overrides the same key from `--config`.
#[derive(Debug, Default, Args)]
pub struct ConfigArgs {
    /// Plain key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub patch_size: Option<String>,
    #[arg(long)]
    pub overlap_pad: Option<String>,
    #[arg(long)]
    pub gaussians_per_patch: Option<String>,
    #[arg(long)]
    pub steps: Option<String>,
    #[arg(long)]
    pub lr: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub w_recons: Option<String>,
    #[arg(long)]
    pub w_gan: Option<String>,
    #[arg(long)]
    pub w_lpips: Option<String>,
    #[arg(long)]
    pub w_align: Option<String>,
    /// Hidden-fraction range lo,hi for generated masks.
    #[arg(long)]
    pub mask_ratio: Option<String>,
    #[arg(long)]
    pub mask_kind: Option<String>,
    #[arg(long)]
    pub workers: Option<String>,
    /// Total-variation weight on hidden pixels (0 disables).
    #[arg(long)]
    pub tv_weight: Option<String>,
    /// Global gradient-norm clip, or "none".
    #[arg(long)]
    pub clip_norm: Option<String>,
    /// Loss-mask dropout schedule start,end,increment,every, or "none".
    #[arg(long)]
    pub mask_schedule: Option<String>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let flags = [
            ("patch_size", &self.patch_size),
            ("overlap_pad", &self.overlap_pad),
            ("gaussians_per_patch", &self.gaussians_per_patch),
            ("steps", &self.steps),
            ("lr", &self.lr),
            ("seed", &self.seed),
            ("w_recons", &self.w_recons),
            ("w_gan", &self.w_gan),
            ("w_lpips", &self.w_lpips),
            ("w_align", &self.w_align),
            ("mask_ratio", &self.mask_ratio),
            ("mask_kind", &self.mask_kind),
            ("workers", &self.workers),
            ("tv_weight", &self.tv_weight),
            ("clip_norm", &self.clip_norm),
            ("mask_schedule", &self.mask_schedule),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| crate::Error::InvalidConfig(format!("bad integer '{t}'")))
        })
        .collect()
}

fn parse_sizes(s: &str) -> Result<Vec<(usize, usize)>> {
    s.split(',')
        .map(|t| {
            let (h, w) = t
                .trim()
                .split_once('x')
                .ok_or_else(|| crate::Error::InvalidConfig(format!("size '{t}' is not HxW")))?;
            let n = parse_usize_list(&format!("{h},{w}"))?;
            Ok((n[0], n[1]))
        })
        .collect()
}

fn parse_ratio(s: &str) -> Result<(f64, f64)> {
    let mut cfg = RunConfig::default();
    cfg.set("mask_ratio", s)?;
    Ok(cfg.mask_ratio)
}

/// Executes a parsed command line, printing results to stdout.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit { image, out_dir, config } => {
            let cfg = config.resolve()?;
            print!("{}", cmd_fit(&image, &out_dir, &cfg)?);
        }
        Command::Inpaint {
            image,
            mask,
            generate_mask,
            ground_truth,
            out_dir,
            config,
        } => {
            let cfg = config.resolve()?;
            let mask = match (mask, generate_mask) {
                (Some(p), _) => MaskSource::File(p),
                (None, Some(kind)) => MaskSource::Generate(MaskSpec {
                    ratio: cfg.mask_ratio,
                    kind: kind.parse()?,
                    brush_radius: None,
                    seed: cfg.seed,
                }),
                (None, None) => {
                    return Err(crate::Error::InvalidConfig(
                        "inpaint needs --mask or --generate-mask".into(),
                    ))
                }
            };
            let job = InpaintJob {
                image,
                mask,
                ground_truth,
                out_dir,
            };
            print!("{}", cmd_inpaint(&job, &cfg)?);
        }
        Command::Bench {
            sizes,
            per_patch,
            workers,
            runs,
            patch_size,
            overlap_pad,
            seed,
            out,
        } => {
            let spec = BenchSpec {
                sizes: parse_sizes(&sizes)?,
                per_patch: parse_usize_list(&per_patch)?,
                workers: parse_usize_list(&workers)?,
                runs,
                patch_size,
                overlap_pad,
                seed,
            };
            let rows = cmd_bench(&spec)?;
            match out {
                Some(path) => {
                    let f = std::fs::File::create(&path).map_err(|e| crate::Error::io(&path, e))?;
                    write_bench_csv(&rows, f).map_err(|e| crate::Error::io(&path, e))?;
                }
                None => write_bench_csv(&rows, std::io::stdout().lock())
                    .map_err(|e| crate::Error::io("<stdout>", e))?,
            }
        }
        Command::Genmask {
            height,
            width,
            ratio,
            kind,
            brush_radius,
            seed,
            out,
        } => {
            let spec = MaskSpec {
                ratio: parse_ratio(&ratio)?,
                kind: kind.parse()?,
                brush_radius,
                seed,
            };
            let mask = cmd_genmask((height, width), &spec, &out)?;
            println!("hidden_ratio={:.6}", mask.hidden_ratio());
        }
        Command::Metrics { a, b, region } => {
            let m = cmd_metrics(&a, &b, region.as_deref())?;
            println!("psnr={:.6}", m.psnr);
            match m.ssim {
                Some(s) => println!("ssim={s:.6}"),
                None => println!("ssim=n/a"),
            }
        }
    }
    Ok(())
}
