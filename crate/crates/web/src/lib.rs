//! Browser bindings for three small demonstrations: degrading a scene into
//! an HSI/MSI pair, the capped-L1 proximal radius, and an end-to-end fusion
//! run on a tiny synthetic scene.

use wasm_bindgen::prelude::*;

use sdrbsf::bsf::prox_capl1_radius;
use sdrbsf::config::{BlurChoice, PipelineConfig};
use sdrbsf::degradation::{simulate_pair, upsample_replicate, DegradationSpec, WarpSpec};
use sdrbsf::metrics::psnr;
use sdrbsf::pipeline::{fuse, ppm_bytes, register};
use sdrbsf::synthetic::{ikonos_like_srf, low_rank_scene};
use sdrbsf::Cube;

/// Side length of the demo scenes.
pub const SCENE_SIDE: usize = 48;
const SCENE_BANDS: usize = 8;
const HSI_RGB: [usize; 3] = [6, 3, 1];
const MSI_RGB: [usize; 3] = [2, 1, 0];

fn js(e: sdrbsf::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// RGBA pixels of three stretched bands.
fn rgba(c: &Cube, bands: [usize; 3]) -> sdrbsf::Result<Vec<u8>> {
    let ppm = ppm_bytes(c, bands)?;
    let header = format!("P6 {} {} 255\n", c.cols(), c.rows()).len();
    Ok(ppm[header..]
        .chunks_exact(3)
        .flat_map(|p| [p[0], p[1], p[2], 255])
        .collect())
}

/// Places equally sized RGBA panels side by side.
fn side_by_side(panels: &[Vec<u8>], rows: usize, cols: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(panels.len() * rows * cols * 4);
    for i in 0..rows {
        for p in panels {
            out.extend_from_slice(&p[i * cols * 4..(i + 1) * cols * 4]);
        }
    }
    out
}

fn demo_config(stride: usize, blur_sigma: f64, rotation: f64) -> sdrbsf::Result<PipelineConfig> {
    let size = 2 * (2.0 * blur_sigma).ceil() as usize + 1;
    let cfg = PipelineConfig {
        stride,
        blur: BlurChoice::Gaussian { size, sigma: blur_sigma },
        warp: (rotation != 0.0).then(|| WarpSpec::rotation(rotation)).transpose()?,
        subspace_dim: 4,
        rank: 4,
        ..PipelineConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(seed: u64, cfg: &PipelineConfig) -> sdrbsf::Result<(Cube, Cube, Cube)> {
    let x = low_rank_scene(SCENE_SIDE, SCENE_SIDE, SCENE_BANDS, 4, seed)?;
    let spec = DegradationSpec {
        blur: cfg.blur_kernel()?,
        stride: cfg.stride,
        srf: ikonos_like_srf(SCENE_BANDS)?,
        snr_h: cfg.snr_h,
        snr_m: cfg.snr_m,
        seed,
    };
    let (hsi, msi) = simulate_pair(&x, &spec, cfg.warp.as_ref())?;
    Ok((x, hsi, msi))
}

/// Ground truth, observed HSI (pixel-replicated back to full size) and MSI
/// as three RGBA panels, `3·SCENE_SIDE` wide.
pub fn degrade_panels(seed: u64, rotation: f64, blur_sigma: f64, stride: usize) -> sdrbsf::Result<Vec<u8>> {
    let cfg = demo_config(stride, blur_sigma, rotation)?;
    let (x, hsi, msi) = simulate(seed, &cfg)?;
    let up = upsample_replicate(&hsi, stride, SCENE_SIDE, SCENE_SIDE)?;
    Ok(side_by_side(
        &[rgba(&x, HSI_RGB)?, rgba(&up, HSI_RGB)?, rgba(&msi, MSI_RGB)?],
        SCENE_SIDE,
        SCENE_SIDE,
    ))
}

/// Proximal radius for `samples` input norms evenly spaced over
/// `[0, max_norm]`.
pub fn prox_radii(weight: f64, rho: f64, max_norm: f64, samples: usize) -> Vec<f64> {
    let n = samples.max(2);
    (0..n)
        .map(|k| prox_capl1_radius(max_norm * k as f64 / (n - 1) as f64, weight, rho))
        .collect()
}

#[derive(Debug, Clone)]
pub struct FusionSummary {
    /// Ground truth and fused image as two RGBA panels.
    pub rgba: Vec<u8>,
    pub psnr: f64,
    pub objective: Vec<f64>,
}

/// Simulates a rotated pair, optionally registers it with a short cyclic
/// training run, then fuses it.
pub fn fusion(seed: u64, rotation: f64, alpha: f64, iterations: usize, registered: bool) -> sdrbsf::Result<FusionSummary> {
    let mut cfg = demo_config(4, 2.0, rotation)?;
    cfg.solver.alpha = alpha;
    cfg.solver.max_outer = iterations;
    cfg.train.hidden = 2;
    cfg.train.learning_rate = 1e-2;
    cfg.train.epochs_per_cycle = 400;
    cfg.train.cycles = 2;
    cfg.validate()?;
    let (x, hsi, msi) = simulate(seed, &cfg)?;
    let y = if registered { register(&hsi, &msi, &cfg)?.registered } else { hsi };
    let out = fuse(&y, &msi, &cfg)?;
    Ok(FusionSummary {
        rgba: side_by_side(&[rgba(&x, HSI_RGB)?, rgba(&out.fused, HSI_RGB)?], SCENE_SIDE, SCENE_SIDE),
        psnr: psnr(&out.fused, &x)?,
        objective: out.state.objective_trace,
    })
}

#[wasm_bindgen]
pub fn scene_side() -> usize {
    SCENE_SIDE
}

#[wasm_bindgen]
pub fn degrade_preview(seed: u32, rotation: f64, blur_sigma: f64, stride: usize) -> Result<Vec<u8>, JsError> {
    degrade_panels(seed.into(), rotation, blur_sigma, stride).map_err(js)
}

#[wasm_bindgen]
pub fn prox_curve(weight: f64, rho: f64, max_norm: f64, samples: usize) -> Vec<f64> {
    prox_radii(weight, rho, max_norm, samples)
}

#[wasm_bindgen]
pub struct FusionResult {
    inner: FusionSummary,
}

#[wasm_bindgen]
impl FusionResult {
    #[wasm_bindgen(getter)]
    pub fn rgba(&self) -> Vec<u8> {
        self.inner.rgba.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn psnr(&self) -> f64 {
        self.inner.psnr
    }

    #[wasm_bindgen(getter)]
    pub fn objective(&self) -> Vec<f64> {
        self.inner.objective.clone()
    }
}

#[wasm_bindgen]
pub fn fusion_demo(seed: u32, rotation: f64, alpha: f64, iterations: usize, registered: bool) -> Result<FusionResult, JsError> {
    fusion(seed.into(), rotation, alpha, iterations, registered)
        .map(|inner| FusionResult { inner })
        .map_err(js)
}
