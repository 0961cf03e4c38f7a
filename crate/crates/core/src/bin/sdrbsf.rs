use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sdrbsf::config::PipelineConfig;
use sdrbsf::metrics::MetricReport;
use sdrbsf::pipeline::{
    cmd_export_ppm, cmd_fuse, cmd_metrics, cmd_pipeline, cmd_register, cmd_simulate,
};

/// Spectral-domain registration and blind fusion of hyperspectral and
/// multispectral images.
#[derive(Parser)]
#[command(name = "sdrbsf", version)]
struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base seed; overrides the configuration's seed keys.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Degrade a high-resolution cube into an HSI/MSI pair.
    Simulate { input: PathBuf },
    /// Register an HSI onto the MSI grid by spectral super-resolution.
    Register { hsi: PathBuf, msi: PathBuf },
    /// Fuse a registered HSI with the MSI.
    Fuse { y_registered: PathBuf, msi: PathBuf },
    /// Compare a cube against a reference.
    Metrics {
        x: PathBuf,
        reference: PathBuf,
        /// Scale factor for ERGAS; defaults to the configured stride.
        #[arg(long)]
        sf: Option<f64>,
    },
    /// simulate, register, fuse and metrics in one run.
    Pipeline { input: PathBuf },
    /// Write three bands as an 8-bit PPM, each min-max stretched.
    ExportPpm {
        cube: PathBuf,
        band_r: usize,
        band_g: usize,
        band_b: usize,
        /// Output file; defaults to `<out>/<cube stem>.ppm`.
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

fn print_report(m: &MetricReport) {
    println!("{}", MetricReport::COLUMNS.join(","));
    let vals: Vec<String> = m.values().iter().map(|v| format!("{v:.6}")).collect();
    println!("{}", vals.join(","));
}

fn run(cli: Cli, cfg: PipelineConfig) -> sdrbsf::Result<()> {
    let out = cli.out.as_path();
    match cli.command {
        Command::Simulate { input } => {
            let a = cmd_simulate(&input, &cfg, out)?;
            eprintln!("wrote {} and {}", a.hsi.display(), a.msi.display());
        }
        Command::Register { hsi, msi } => {
            let o = cmd_register(&hsi, &msi, &cfg, out)?;
            let last = o.trace.last().map_or(f64::NAN, |r| r.loss);
            eprintln!("registered over {} cycles, final loss {last:.6}", o.set_sizes.len());
        }
        Command::Fuse { y_registered, msi } => {
            let r = cmd_fuse(&y_registered, &msi, &cfg, out)?;
            eprintln!(
                "fused in {} outer iterations, objective {:.6}",
                r.state.iterations(),
                r.state.objective_trace.last().unwrap()
            );
        }
        Command::Metrics { x, reference, sf } => {
            let sf = sf.unwrap_or(cfg.stride as f64);
            let m = cmd_metrics(&x, &reference, sf, Some(out))?;
            print_report(&m);
        }
        Command::Pipeline { input } => {
            let r = cmd_pipeline(&input, &cfg, out)?;
            eprintln!("fusion: {} outer iterations", r.outer_iterations);
            print_report(&r.metrics);
        }
        Command::ExportPpm {
            cube,
            band_r,
            band_g,
            band_b,
            file,
        } => {
            let file = file.unwrap_or_else(|| {
                let stem = cube.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                out.join(format!("{stem}.ppm"))
            });
            if let Some(dir) = file.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| sdrbsf::Error::Io {
                    path: dir.to_path_buf(),
                    source: e,
                })?;
            }
            cmd_export_ppm(&cube, [band_r, band_g, band_b], &file)?;
            eprintln!("wrote {}", file.display());
        }
    }
    Ok(())
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> sdrbsf::Result<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(cli.config.as_deref(), cli.seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: configuration: {e}");
            return ExitCode::from(2);
        }
    };
    match run(cli, cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
