//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! rejected. [`PipelineConfig::to_text`] writes every key with its resolved
//! value, so a written configuration replays the run exactly.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `stride` | 4 | scale factor between MSI and HSI grids |
//! | `blur` | `gaussian:7:2` | sensor PSF: `gaussian:<size>:<sigma>` or `delta` |
//! | `srf` | `ikonos` | `ikonos`, `average:<h>` or `file:<csv path>` |
//! | `snr_h`, `snr_m` | 35, 40 | noise level in dB, or `none` |
//! | `warp` | `none` | `none`, `scaling:<f>`, `rotation:<deg>`, `pincushion:<k>` |
//! | `bhat` | `auto` | registration kernel; `auto` is `gaussian:<2d+1>:<d>` |
//! | `subspace_dim` | 10 | dictionary size used for registration |
//! | `rank` | 6 | dictionary size used for fusion |
//! | `learning_rate` … `omega` | see [`TrainConfig`] | network training |
//! | `alpha` … `inner_iters_r` | see [`SolverConfig`] | fusion solver |
//! | `seed` | 0 | noise seed; also the base of the two below |
//! | `train_seed`, `solver_seed` | `seed + 1`, `seed + 2` | |

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bsf::SolverConfig;
use crate::degradation::{BlurKernel, KernelKind, WarpKind, WarpSpec};
use crate::error::{Error, Result};
use crate::io::read_matrix_csv;
use crate::spl::TrainConfig;
use crate::synthetic::{block_average_srf, ikonos_like_srf};
use crate::tensor::Mat;

#[derive(Debug, Clone, PartialEq)]
pub enum BlurChoice {
    Gaussian { size: usize, sigma: f64 },
    Delta,
}

impl BlurChoice {
    pub fn kernel(&self) -> Result<BlurKernel> {
        match *self {
            BlurChoice::Gaussian { size, sigma } => BlurKernel::gaussian(size, sigma),
            BlurChoice::Delta => BlurKernel::delta(1),
        }
    }

    /// Default registration kernel for scale factor `d`.
    pub fn registration_default(d: usize) -> Self {
        BlurChoice::Gaussian {
            size: 2 * d + 1,
            sigma: d as f64,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        if s == "delta" {
            return Some(BlurChoice::Delta);
        }
        let rest = s.strip_prefix("gaussian:")?;
        let (size, sigma) = rest.split_once(':')?;
        Some(BlurChoice::Gaussian {
            size: size.parse().ok()?,
            sigma: sigma.parse().ok()?,
        })
    }

    fn text(&self) -> String {
        match self {
            BlurChoice::Gaussian { size, sigma } => format!("gaussian:{size}:{sigma}"),
            BlurChoice::Delta => "delta".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SrfChoice {
    Ikonos,
    Average(usize),
    File(PathBuf),
}

impl SrfChoice {
    pub fn matrix(&self, bands: usize) -> Result<Mat> {
        match self {
            SrfChoice::Ikonos => ikonos_like_srf(bands),
            SrfChoice::Average(h) => block_average_srf(*h, bands),
            SrfChoice::File(p) => read_matrix_csv(p),
        }
    }

    fn parse(s: &str) -> Option<Self> {
        if s == "ikonos" {
            Some(SrfChoice::Ikonos)
        } else if let Some(h) = s.strip_prefix("average:") {
            h.parse().ok().map(SrfChoice::Average)
        } else {
            s.strip_prefix("file:").map(|p| SrfChoice::File(PathBuf::from(p)))
        }
    }

    fn text(&self) -> String {
        match self {
            SrfChoice::Ikonos => "ikonos".into(),
            SrfChoice::Average(h) => format!("average:{h}"),
            SrfChoice::File(p) => format!("file:{}", p.display()),
        }
    }
}

fn parse_warp(s: &str) -> Option<Result<Option<WarpSpec>>> {
    if s == "none" {
        return Some(Ok(None));
    }
    let (kind, value) = s.split_once(':')?;
    let v: f64 = value.parse().ok()?;
    Some(
        match kind {
            "scaling" => WarpSpec::scaling(v),
            "rotation" => WarpSpec::rotation(v),
            "pincushion" => WarpSpec::pincushion(v),
            _ => return None,
        }
        .map(Some),
    )
}

fn warp_text(w: &Option<WarpSpec>) -> String {
    match w.as_ref().map(|w| &w.kind) {
        None => "none".into(),
        Some(WarpKind::Scaling { factor }) => format!("scaling:{factor}"),
        Some(WarpKind::Rotation { degrees }) => format!("rotation:{degrees}"),
        Some(WarpKind::Pincushion { coefficient }) => format!("pincushion:{coefficient}"),
    }
}

fn snr_text(v: Option<f64>) -> String {
    v.map_or("none".into(), |v| v.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub stride: usize,
    pub blur: BlurChoice,
    pub srf: SrfChoice,
    pub snr_h: Option<f64>,
    pub snr_m: Option<f64>,
    pub warp: Option<WarpSpec>,
    /// `None` selects [`BlurChoice::registration_default`].
    pub bhat: Option<BlurChoice>,
    pub subspace_dim: usize,
    pub rank: usize,
    pub train: TrainConfig,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            stride: 4,
            blur: BlurChoice::Gaussian { size: 7, sigma: 2.0 },
            srf: SrfChoice::Ikonos,
            snr_h: Some(35.0),
            snr_m: Some(40.0),
            warp: None,
            bhat: None,
            subspace_dim: 10,
            rank: 6,
            train: TrainConfig {
                seed: 1,
                ..TrainConfig::default()
            },
            solver: SolverConfig {
                seed: 2,
                ..SolverConfig::default()
            },
            seed: 0,
        }
    }
}

fn bad(key: &str, value: &str) -> Error {
    Error::param(format!("invalid value {value:?} for key {key}"))
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value))
}

impl PipelineConfig {
    /// Resolved registration kernel choice.
    pub fn bhat_choice(&self) -> BlurChoice {
        self.bhat
            .clone()
            .unwrap_or_else(|| BlurChoice::registration_default(self.stride))
    }

    /// Sets the base seed and re-derives the training and solver seeds.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed.wrapping_add(1);
        self.solver.seed = seed.wrapping_add(2);
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        let mut explicit_train_seed = None;
        let mut explicit_solver_seed = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::param(format!("line {}: expected key = value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let t = &mut cfg.train;
            let s = &mut cfg.solver;
            match key {
                "stride" => cfg.stride = num(key, value)?,
                "blur" => cfg.blur = BlurChoice::parse(value).ok_or_else(|| bad(key, value))?,
                "srf" => cfg.srf = SrfChoice::parse(value).ok_or_else(|| bad(key, value))?,
                "snr_h" | "snr_m" => {
                    let v = if value == "none" { None } else { Some(num(key, value)?) };
                    if key == "snr_h" {
                        cfg.snr_h = v
                    } else {
                        cfg.snr_m = v
                    }
                }
                "warp" => cfg.warp = parse_warp(value).ok_or_else(|| bad(key, value))??,
                "bhat" => {
                    cfg.bhat = if value == "auto" {
                        None
                    } else {
                        Some(BlurChoice::parse(value).ok_or_else(|| bad(key, value))?)
                    }
                }
                "subspace_dim" => cfg.subspace_dim = num(key, value)?,
                "rank" => cfg.rank = num(key, value)?,
                "learning_rate" => t.learning_rate = num(key, value)?,
                "adam_beta1" => t.adam_beta1 = num(key, value)?,
                "adam_beta2" => t.adam_beta2 = num(key, value)?,
                "adam_eps" => t.adam_eps = num(key, value)?,
                "epochs_per_cycle" => t.epochs_per_cycle = num(key, value)?,
                "cycles" => t.cycles = num(key, value)?,
                "patch_size" => t.patch_size = num(key, value)?,
                "patch_stride" => t.patch_stride = num(key, value)?,
                "kernel_size" => t.kernel_size = num(key, value)?,
                "hidden" => t.hidden = num(key, value)?,
                "omega" => t.omega = num(key, value)?,
                "alpha" => s.alpha = num(key, value)?,
                "rho" => s.rho = num(key, value)?,
                "lambda" => s.lambda = num(key, value)?,
                "max_outer" => s.max_outer = num(key, value)?,
                "tol_rel" => s.tol_rel = num(key, value)?,
                "inner_iters_a" => s.inner_iters_a = num(key, value)?,
                "inner_iters_r" => s.inner_iters_r = num(key, value)?,
                "seed" => cfg.seed = num(key, value)?,
                "train_seed" => explicit_train_seed = Some(num(key, value)?),
                "solver_seed" => explicit_solver_seed = Some(num(key, value)?),
                _ => return Err(Error::param(format!("unknown configuration key {key:?}"))),
            }
        }
        cfg.train.seed = explicit_train_seed.unwrap_or(cfg.seed.wrapping_add(1));
        cfg.solver.seed = explicit_solver_seed.unwrap_or(cfg.seed.wrapping_add(2));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::param("stride must be at least 1"));
        }
        if self.subspace_dim == 0 || self.rank == 0 {
            return Err(Error::param("subspace_dim and rank must be positive"));
        }
        self.blur.kernel()?;
        self.bhat_choice().kernel()?;
        self.train.validate()?;
        self.solver.validate()
    }

    /// Every key with its resolved value.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let s = &self.solver;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        kv("stride", self.stride.to_string());
        kv("blur", self.blur.text());
        kv("srf", self.srf.text());
        kv("snr_h", snr_text(self.snr_h));
        kv("snr_m", snr_text(self.snr_m));
        kv("warp", warp_text(&self.warp));
        kv("bhat", self.bhat_choice().text());
        kv("subspace_dim", self.subspace_dim.to_string());
        kv("rank", self.rank.to_string());
        kv("learning_rate", t.learning_rate.to_string());
        kv("adam_beta1", t.adam_beta1.to_string());
        kv("adam_beta2", t.adam_beta2.to_string());
        kv("adam_eps", t.adam_eps.to_string());
        kv("epochs_per_cycle", t.epochs_per_cycle.to_string());
        kv("cycles", t.cycles.to_string());
        kv("patch_size", t.patch_size.to_string());
        kv("patch_stride", t.patch_stride.to_string());
        kv("kernel_size", t.kernel_size.to_string());
        kv("hidden", t.hidden.to_string());
        kv("omega", t.omega.to_string());
        kv("alpha", s.alpha.to_string());
        kv("rho", s.rho.to_string());
        kv("lambda", s.lambda.to_string());
        kv("max_outer", s.max_outer.to_string());
        kv("tol_rel", s.tol_rel.to_string());
        kv("inner_iters_a", s.inner_iters_a.to_string());
        kv("inner_iters_r", s.inner_iters_r.to_string());
        kv("seed", self.seed.to_string());
        kv("train_seed", t.seed.to_string());
        kv("solver_seed", s.seed.to_string());
        out
    }

    /// Blur used to simulate the HSI.
    pub fn blur_kernel(&self) -> Result<BlurKernel> {
        self.blur.kernel()
    }

    /// Kernel used to map the super-resolved MSI onto the HSI grid.
    pub fn bhat_kernel(&self) -> Result<BlurKernel> {
        self.bhat_choice().kernel()
    }
}

/// Human-readable description of a kernel, for logs.
pub fn describe_kernel(k: &BlurKernel) -> String {
    match k.kind() {
        KernelKind::Gaussian { sigma } => format!("gaussian {}x{} sigma {sigma}", k.size(), k.size()),
        KernelKind::Delta => "delta".into(),
        KernelKind::Explicit => format!("explicit {}x{}", k.size(), k.size()),
    }
}
