//! File-level commands: simulate, register, fuse, metrics, the full
//! pipeline and PPM export. Every command writes into an output directory
//! and removes its own partial artifacts when it fails.

use std::fs;
use std::path::{Path, PathBuf};

use crate::bsf::{solve, BsfProblem, SolveOutput};
use crate::config::PipelineConfig;
use crate::degradation::{simulate_pair, DegradationSpec};
use crate::error::{Error, Result};
use crate::io::{read_cube, write_checkpoint, write_csv, write_cube, write_matrix_csv, Precision};
use crate::metrics::MetricReport;
use crate::spl::{train_sdr, SdrOutcome};
use crate::subspace::build_dictionary;
use crate::tensor::Cube;

pub const HSI_FILE: &str = "hsi.cube";
pub const MSI_FILE: &str = "msi.cube";
pub const TRUTH_FILE: &str = "ground_truth.cube";
pub const SRF_TRUE_FILE: &str = "srf_true.csv";
pub const SIMULATE_MANIFEST: &str = "simulate_manifest.txt";
pub const REGISTERED_FILE: &str = "y_registered.cube";
pub const CHECKPOINT_DIR: &str = "checkpoint";
pub const LOSS_TRACE_FILE: &str = "loss_trace.csv";
pub const FUSED_FILE: &str = "fused.cube";
pub const SRF_ESTIMATE_FILE: &str = "srf_estimate.csv";
pub const SOLVER_TRACE_FILE: &str = "solver_trace.csv";
/// Per-iteration wall-clock times. The only artifact that differs between
/// otherwise identical runs.
pub const TIMING_FILE: &str = "timing.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";

/// Runs `body`; on error deletes `artifacts` under `out` and tags the error
/// with `stage`.
fn stage<T>(
    name: &'static str,
    out: &Path,
    artifacts: &[&str],
    body: impl FnOnce() -> Result<T>,
) -> Result<T> {
    body().map_err(|e| {
        for a in artifacts {
            let p = out.join(a);
            if p.is_dir() {
                let _ = fs::remove_dir_all(&p);
            } else {
                let _ = fs::remove_file(&p);
            }
        }
        match e {
            Error::Stage { .. } => e,
            e => Error::Stage {
                stage: name,
                source: Box::new(e),
            },
        }
    })
}

fn ensure_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct SimulateArtifacts {
    pub hsi: PathBuf,
    pub msi: PathBuf,
    pub truth: PathBuf,
}

/// Degrades a high-resolution cube into an (optionally warped) HSI and an
/// MSI, and copies the input alongside them.
pub fn cmd_simulate(input: &Path, cfg: &PipelineConfig, out: &Path) -> Result<SimulateArtifacts> {
    let files = [HSI_FILE, MSI_FILE, TRUTH_FILE, SRF_TRUE_FILE, SIMULATE_MANIFEST];
    stage("simulate", out, &files, || {
        ensure_dir(out)?;
        let x = read_cube(input)?;
        let spec = DegradationSpec {
            blur: cfg.blur_kernel()?,
            stride: cfg.stride,
            srf: cfg.srf.matrix(x.bands())?,
            snr_h: cfg.snr_h,
            snr_m: cfg.snr_m,
            seed: cfg.seed,
        };
        let (hsi, msi) = simulate_pair(&x, &spec, cfg.warp.as_ref())?;
        let art = SimulateArtifacts {
            hsi: out.join(HSI_FILE),
            msi: out.join(MSI_FILE),
            truth: out.join(TRUTH_FILE),
        };
        write_cube(&art.hsi, &hsi, Precision::F32)?;
        write_cube(&art.msi, &msi, Precision::F32)?;
        write_cube(&art.truth, &x, Precision::F32)?;
        write_matrix_csv(&out.join(SRF_TRUE_FILE), &spec.srf)?;
        write_text(
            &out.join(SIMULATE_MANIFEST),
            &format!("# input {}\n{}", input.display(), cfg.to_text()),
        )?;
        Ok(art)
    })
}

/// Runs spectral-domain registration in memory.
pub fn register(hsi: &Cube, msi: &Cube, cfg: &PipelineConfig) -> Result<SdrOutcome> {
    let l = cfg.subspace_dim.min(hsi.bands());
    train_sdr(hsi, msi, &cfg.bhat_kernel()?, cfg.stride, &cfg.train, l)
}

/// Registers the HSI onto the MSI grid; writes the registered cube, the
/// network checkpoint and the per-epoch loss trace.
pub fn cmd_register(hsi: &Path, msi: &Path, cfg: &PipelineConfig, out: &Path) -> Result<SdrOutcome> {
    let files = [REGISTERED_FILE, CHECKPOINT_DIR, LOSS_TRACE_FILE];
    stage("register", out, &files, || {
        ensure_dir(out)?;
        let y = read_cube(hsi)?;
        let z = read_cube(msi)?;
        let outcome = register(&y, &z, cfg)?;
        write_cube(&out.join(REGISTERED_FILE), &outcome.registered, Precision::F32)?;
        write_checkpoint(&out.join(CHECKPOINT_DIR), &outcome.network)?;
        let rows: Vec<Vec<f64>> = outcome
            .trace
            .iter()
            .map(|r| vec![r.cycle as f64, r.epoch as f64, r.loss])
            .collect();
        write_csv(&out.join(LOSS_TRACE_FILE), &["cycle", "epoch", "loss"], &rows)?;
        Ok(outcome)
    })
}

/// Runs blind fusion in memory with the registration kernel as the preset
/// spatial operator.
pub fn fuse(y_registered: &Cube, msi: &Cube, cfg: &PipelineConfig) -> Result<SolveOutput> {
    let r = cfg.rank.min(y_registered.bands());
    let dict = build_dictionary(y_registered, r)?;
    let p = BsfProblem::new(y_registered, msi, dict, cfg.bhat_kernel()?, cfg.stride)?;
    let mut out = solve(&p, &cfg.solver, None)?;
    out.fused = out.fused.with_scale(msi.scale());
    Ok(out)
}

/// Fuses a registered HSI with the MSI; writes the fused cube, the
/// estimated SRF and the solver traces.
pub fn cmd_fuse(y_registered: &Path, msi: &Path, cfg: &PipelineConfig, out: &Path) -> Result<SolveOutput> {
    let files = [FUSED_FILE, SRF_ESTIMATE_FILE, SOLVER_TRACE_FILE, TIMING_FILE];
    stage("fuse", out, &files, || {
        ensure_dir(out)?;
        let y = read_cube(y_registered)?;
        let z = read_cube(msi)?;
        let res = fuse(&y, &z, cfg)?;
        write_cube(&out.join(FUSED_FILE), &res.fused, Precision::F32)?;
        write_matrix_csv(&out.join(SRF_ESTIMATE_FILE), &res.state.r_srf)?;
        let st = &res.state;
        let rows: Vec<Vec<f64>> = st
            .objective_trace
            .iter()
            .enumerate()
            .map(|(k, &obj)| {
                if k == 0 {
                    vec![0.0, obj, f64::NAN, f64::NAN]
                } else {
                    vec![k as f64, obj, st.step_norm_trace[k - 1], st.nnz_rows_trace[k - 1] as f64]
                }
            })
            .collect();
        write_csv(
            &out.join(SOLVER_TRACE_FILE),
            &["iteration", "objective", "step_norm", "nonzero_rows"],
            &rows,
        )?;
        let timing: Vec<Vec<f64>> = st
            .wall_ms_trace
            .iter()
            .enumerate()
            .map(|(k, &t)| vec![(k + 1) as f64, t])
            .collect();
        write_csv(&out.join(TIMING_FILE), &["iteration", "wall_ms"], &timing)?;
        Ok(res)
    })
}

/// Compares `x` against the reference `reference`; writes `metrics.csv`
/// when `out` is given.
pub fn cmd_metrics(x: &Path, reference: &Path, sf: f64, out: Option<&Path>) -> Result<MetricReport> {
    let files = [METRICS_FILE];
    let dir = out.unwrap_or(Path::new("."));
    stage("metrics", dir, if out.is_some() { &files } else { &[] }, || {
        let report = MetricReport::compute(&read_cube(x)?, &read_cube(reference)?, sf)?;
        if let Some(out) = out {
            ensure_dir(out)?;
            write_csv(&out.join(METRICS_FILE), &MetricReport::COLUMNS, &[report.values().to_vec()])?;
        }
        Ok(report)
    })
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub metrics: MetricReport,
    pub outer_iterations: usize,
    pub final_objective: f64,
}

/// simulate, register, fuse and score in one run. `manifest.txt` holds the
/// fully resolved configuration and replays the run when passed back as
/// the configuration.
pub fn cmd_pipeline(input: &Path, cfg: &PipelineConfig, out: &Path) -> Result<PipelineReport> {
    ensure_dir(out)?;
    write_text(
        &out.join(MANIFEST_FILE),
        &format!("# pipeline input {}\n{}", input.display(), cfg.to_text()),
    )?;
    let sim = cmd_simulate(input, cfg, out)?;
    cmd_register(&sim.hsi, &sim.msi, cfg, out)?;
    let fused = cmd_fuse(&out.join(REGISTERED_FILE), &sim.msi, cfg, out)?;
    let metrics = cmd_metrics(&out.join(FUSED_FILE), &sim.truth, cfg.stride as f64, Some(out))?;
    Ok(PipelineReport {
        metrics,
        outer_iterations: fused.state.iterations(),
        final_objective: *fused.state.objective_trace.last().unwrap(),
    })
}

/// Encodes three bands as a binary PPM. Each band is stretched linearly
/// from its own minimum to maximum onto 0..=255; a constant band maps to
/// mid gray (128).
pub fn ppm_bytes(c: &Cube, bands: [usize; 3]) -> Result<Vec<u8>> {
    for b in bands {
        if b >= c.bands() {
            return Err(Error::param(format!(
                "band {b} out of range for a {}-band cube",
                c.bands()
            )));
        }
    }
    let stretched: Vec<Vec<u8>> = bands.iter().map(|&b| stretch(c.band(b))).collect();
    let mut out = format!("P6 {} {} 255\n", c.cols(), c.rows()).into_bytes();
    out.reserve(3 * c.pixels());
    for p in 0..c.pixels() {
        out.extend(stretched.iter().map(|s| s[p]));
    }
    Ok(out)
}

fn stretch(band: &[f64]) -> Vec<u8> {
    let lo = band.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = band.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return vec![128; band.len()];
    }
    band.iter().map(|&v| ((v - lo) / (hi - lo) * 255.0).round() as u8).collect()
}

pub fn cmd_export_ppm(cube: &Path, bands: [usize; 3], out_file: &Path) -> Result<()> {
    stage("export-ppm", Path::new(""), &[], || {
        let bytes = ppm_bytes(&read_cube(cube)?, bands)?;
        fs::write(out_file, bytes).map_err(|e| Error::io(out_file, e))
    })
}
