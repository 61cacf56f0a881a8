//! Run configuration, loadable from `key = value` text.

use std::path::Path;

use crate::error::{Error, Result};
use crate::optim::{FitConfig, LossWeights, MaskSchedule, DEFAULT_LR};
use crate::raster::{lattice_side, DEFAULT_GAUSSIANS_PER_PATCH, DEFAULT_OVERLAP_PAD, DEFAULT_PATCH_SIZE};

use super::mask::{MaskKind, SMALL_MASK};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub patch_size: usize,
    pub overlap_pad: usize,
    pub gaussians_per_patch: usize,
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
    pub weights: LossWeights,
    pub mask_ratio: (f64, f64),
    pub mask_kind: MaskKind,
    pub workers: usize,
    pub tv_weight: f64,
    pub clip_norm: Option<f64>,
    pub mask_schedule: Option<MaskSchedule>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            patch_size: DEFAULT_PATCH_SIZE,
            overlap_pad: DEFAULT_OVERLAP_PAD,
            gaussians_per_patch: DEFAULT_GAUSSIANS_PER_PATCH,
            steps: 2000,
            lr: DEFAULT_LR,
            seed: 0,
            weights: LossWeights::default(),
            mask_ratio: SMALL_MASK,
            mask_kind: MaskKind::Irregular,
            workers: 1,
            tv_weight: 0.0,
            clip_norm: Some(10.0),
            mask_schedule: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value '{value}' for '{key}'")))
}

fn parse_list(key: &str, value: &str, n: usize) -> Result<Vec<f64>> {
    let parts: Vec<f64> = value
        .split(',')
        .map(|p| parse::<f64>(key, p.trim()))
        .collect::<Result<_>>()?;
    if parts.len() != n {
        return Err(Error::InvalidConfig(format!("'{key}' expects {n} comma-separated values")));
    }
    Ok(parts)
}

impl RunConfig {
    /// Applies one `key = value` setting. Dashes and underscores are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "patch_size" => self.patch_size = parse(&key, value)?,
            "overlap_pad" => self.overlap_pad = parse(&key, value)?,
            "gaussians_per_patch" => self.gaussians_per_patch = parse(&key, value)?,
            "steps" => self.steps = parse(&key, value)?,
            "lr" => self.lr = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "w_recons" => self.weights.recons = parse(&key, value)?,
            "w_gan" => self.weights.gan = parse(&key, value)?,
            "w_lpips" => self.weights.lpips = parse(&key, value)?,
            "w_align" => self.weights.align = parse(&key, value)?,
            "mask_ratio" => {
                let v = parse_list(&key, value, 2)?;
                self.mask_ratio = (v[0], v[1]);
            }
            "mask_kind" => self.mask_kind = value.parse()?,
            "workers" => self.workers = parse(&key, value)?,
            "tv_weight" => self.tv_weight = parse(&key, value)?,
            "clip_norm" => {
                self.clip_norm = match value {
                    "none" | "off" => None,
                    v => Some(parse(&key, v)?),
                }
            }
            "mask_schedule" => {
                self.mask_schedule = match value {
                    "none" | "off" => None,
                    v => {
                        let p = parse_list(&key, v, 4)?;
                        Some(MaskSchedule {
                            start: p[0],
                            end: p[1],
                            increment: p[2],
                            every: p[3] as usize,
                        })
                    }
                }
            }
            other => return Err(Error::InvalidConfig(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn parse_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.parse_text(&text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || 2 * self.overlap_pad >= self.patch_size {
            return Err(Error::InvalidConfig(format!(
                "need patch_size > 2 * overlap_pad, got {} and {}",
                self.patch_size, self.overlap_pad
            )));
        }
        lattice_side(self.gaussians_per_patch)?;
        let (lo, hi) = self.mask_ratio;
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return Err(Error::InvalidConfig(format!("mask_ratio must satisfy 0 < lo <= hi < 1, got {lo},{hi}")));
        }
        self.fit_config().validate()
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            steps: self.steps,
            lr: self.lr,
            weights: self.weights,
            clip_norm: self.clip_norm,
            tv_weight: self.tv_weight,
            seed: self.seed,
            workers: self.workers,
            mask_schedule: self.mask_schedule,
        }
    }

    /// `key=value` lines covering every field.
    pub fn to_text(&self) -> String {
        let schedule = match &self.mask_schedule {
            Some(s) => format!("{},{},{},{}", s.start, s.end, s.increment, s.every),
            None => "none".into(),
        };
        let clip = self.clip_norm.map_or("none".into(), |c| c.to_string());
        let kind = match self.mask_kind {
            MaskKind::Irregular => "irregular",
            MaskKind::Regular => "regular",
        };
        format!(
            "patch_size={}\noverlap_pad={}\ngaussians_per_patch={}\nsteps={}\nlr={}\nseed={}\n\
             w_recons={}\nw_gan={}\nw_lpips={}\nw_align={}\nmask_ratio={},{}\nmask_kind={}\n\
             workers={}\ntv_weight={}\nclip_norm={}\nmask_schedule={}\n",
            self.patch_size,
            self.overlap_pad,
            self.gaussians_per_patch,
            self.steps,
            self.lr,
            self.seed,
            self.weights.recons,
            self.weights.gan,
            self.weights.lpips,
            self.weights.align,
            self.mask_ratio.0,
            self.mask_ratio.1,
            kind,
            self.workers,
            self.tv_weight,
            clip,
            schedule,
        )
    }
}
