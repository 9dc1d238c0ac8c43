//! `dsgen` subcommands. [`run`] parses arguments, executes one command and
//! returns the process exit code.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use clap::{Parser, Subcommand};
use dsgen_core::calibration::{calibrate_tool, synthesize_contacts, Plaque, ToolOffset};
use dsgen_core::error::{Error, Result};
use dsgen_core::imaging::SoftMask;
use dsgen_core::removal::removal_mask;
use dsgen_core::sample::dataset::{write_json, CAMERA_NAMES};
use dsgen_core::sample::{
    compute_stats, generate_dataset_with_progress, verify_dataset, Dataset, GenerationConfig, StatsReport, VerifyOptions,
    VerifyReport,
};
use image::{Rgb, RgbImage};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

pub const VERIFY_REPORT: &str = "verify_report.json";
pub const STATS_REPORT: &str = "stats_report.json";

#[derive(Debug, Parser)]
#[command(name = "dsgen", version, about = "Stereo tool-localization dataset generator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset from a TOML config.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
    },
    /// Re-derive every label by projecting, triangulating and changing frame.
    Verify {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        noise_px: f64,
        /// Seed of the pixel-noise stream.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Histograms, coverage and rejection breakdown of a dataset.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Calibrate a hidden tool offset from simulated plaque contacts.
    CalibrateDemo {
        #[arg(long, value_parser = clap::value_parser!(u64).range(3..))]
        contacts: u64,
        #[arg(long, default_value_t = 0.0)]
        noise_m: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a montage of one sample's images and masks.
    Preview {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        index: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Generate { config, out: dir, workers } => cmd_generate(&config, &dir, workers, out, err),
        Command::Verify { dataset, noise_px, seed } => cmd_verify(&dataset, VerifyOptions { noise_px, seed }, out),
        Command::Stats { dataset } => cmd_stats(&dataset, out),
        Command::CalibrateDemo { contacts, noise_m, seed } => cmd_calibrate_demo(contacts as usize, noise_m, seed, out),
        Command::Preview { dataset, index, out: dir } => cmd_preview(&dataset, index, &dir, out),
    };
    match outcome {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Data(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DATA
        }
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(Error::io("<stdout>", e))
    }
}

type CliResult = std::result::Result<i32, CliError>;

fn cmd_generate(config: &Path, dir: &Path, workers: usize, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    if workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let config = GenerationConfig::load(config)?;
    config.validate()?;
    let total = config.samples;
    let step = (total / 20).max(1);
    let done = AtomicUsize::new(0);
    let progress = |_| {
        let n = done.fetch_add(1, Ordering::Relaxed) + 1;
        if n % step == 0 || n == total {
            eprintln!("{n}/{total} samples written");
        }
    };
    match generate_dataset_with_progress(config, dir, workers, progress) {
        Ok(manifest) => {
            writeln!(out, "wrote {} samples to {}", manifest.sample_count, dir.display())?;
            writeln!(out, "{}", manifest.rejection_stats)?;
            Ok(EXIT_OK)
        }
        Err(Error::AttemptCapReached { attempts, accepted, requested, stats }) => {
            writeln!(err, "error: gave up after {attempts} attempts with {accepted} of {requested} samples accepted")?;
            writeln!(out, "{stats}")?;
            Ok(EXIT_DATA)
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_verify(dataset: &Path, options: VerifyOptions, out: &mut dyn Write) -> CliResult {
    if !(options.noise_px >= 0.0 && options.noise_px.is_finite()) {
        return Err(CliError::Usage("--noise-px must be a non-negative number".into()));
    }
    let dataset = Dataset::open(dataset)?;
    let report: VerifyReport = verify_dataset(&dataset, options)?;
    write_json(&dataset.root.join(VERIFY_REPORT), &report)?;
    writeln!(out, "{}", report.summary())?;
    Ok(if report.pass { EXIT_OK } else { EXIT_VERIFY })
}

fn cmd_stats(dataset: &Path, out: &mut dyn Write) -> CliResult {
    let dataset = Dataset::open(dataset)?;
    let report: StatsReport = compute_stats(&dataset)?;
    write_json(&dataset.root.join(STATS_REPORT), &report)?;
    write!(out, "{}", report.to_text())?;
    let floor = &report.diversity;
    Ok(if floor.applicable && !floor.pass { EXIT_VERIFY } else { EXIT_OK })
}

/// Outcome of one simulated calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationDemo {
    pub true_offset: ToolOffset,
    pub recovered: ToolOffset,
    pub residual_rms_m: f64,
    pub error_m: f64,
}

/// Largest tool tilt away from the plaque normal during a contact (rad).
pub const DEMO_MAX_TILT: f64 = 0.5;

/// Draws a hidden tip offset, presses it onto three orthogonal plaques
/// `contacts` times with Gaussian plane-offset noise `noise_m`, and
/// calibrates.
pub fn calibration_demo(contacts: usize, noise_m: f64, seed: u64) -> Result<CalibrationDemo> {
    if !(noise_m >= 0.0 && noise_m.is_finite()) {
        return Err(Error::InvalidConfig("noise must be a non-negative length".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = Vector3::new(
        rng.random_range(-0.01..0.01),
        rng.random_range(-0.01..0.01),
        rng.random_range(0.15..0.25),
    );
    let observations = synthesize_contacts(&mut rng, &truth, &Plaque::orthogonal_set(), contacts, DEMO_MAX_TILT, noise_m)?;
    let cal = calibrate_tool(&observations)?;
    Ok(CalibrationDemo {
        true_offset: ToolOffset::new(truth),
        recovered: cal.tool,
        residual_rms_m: cal.residual_rms,
        error_m: (cal.tool.tip_offset - truth).norm(),
    })
}

fn cmd_calibrate_demo(contacts: usize, noise_m: f64, seed: u64, out: &mut dyn Write) -> CliResult {
    if !(noise_m >= 0.0 && noise_m.is_finite()) {
        return Err(CliError::Usage("--noise-m must be a non-negative number".into()));
    }
    let demo = calibration_demo(contacts, noise_m, seed)?;
    let v = |p: &Vector3<f64>| format!("[{:.9}, {:.9}, {:.9}]", p.x, p.y, p.z);
    writeln!(out, "contacts:  {contacts} on 3 orthogonal plaques, noise σ = {noise_m} m")?;
    writeln!(out, "true tip:  {}", v(&demo.true_offset.tip_offset))?;
    writeln!(out, "recovered: {}", v(&demo.recovered.tip_offset))?;
    writeln!(out, "residual:  {:.3e} m rms", demo.residual_rms_m)?;
    writeln!(out, "error:     {:.3e} m", demo.error_m)?;
    Ok(EXIT_OK)
}

/// Tile columns of a preview row, one row per camera.
pub const PREVIEW_COLUMNS: [&str; 6] = ["rt", "ro", "bg_rt", "bg_ro", "mask", "tool_only"];

pub fn preview_file_name(index: usize) -> String {
    format!("preview_{index:06}.png")
}

fn mask_image(w: &SoftMask) -> RgbImage {
    RgbImage::from_fn(w.width(), w.height(), |x, y| {
        let v = (w.get(x, y) * 255.0).round().clamp(0.0, 255.0) as u8;
        Rgb([v, v, v])
    })
}

/// Montage of one sample: a row per camera with the four raw captures, the
/// soft removal mask and the composite.
pub fn preview_montage(dataset: &Dataset, index: usize) -> Result<RgbImage> {
    let record = dataset.record(index)?;
    let params = &dataset.manifest.config.removal;
    let (w, h) = record.cameras[0].rt.dimensions();
    let mut montage = RgbImage::new(w * PREVIEW_COLUMNS.len() as u32, h * CAMERA_NAMES.len() as u32);
    for (row, cam) in record.cameras.iter().enumerate() {
        let mask = mask_image(&removal_mask(&cam.rt, &cam.ro, &cam.bg_ro, params)?);
        let tiles = [&cam.rt, &cam.ro, &cam.bg_rt, &cam.bg_ro, &mask, &cam.tool_only];
        for (col, tile) in tiles.into_iter().enumerate() {
            image::imageops::replace(&mut montage, tile, (col as u32 * w) as i64, (row as u32 * h) as i64);
        }
    }
    Ok(montage)
}

fn cmd_preview(dataset: &Path, index: usize, dir: &Path, out: &mut dyn Write) -> CliResult {
    let dataset = Dataset::open(dataset)?;
    let montage = preview_montage(&dataset, index)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(preview_file_name(index));
    dsgen_core::sample::dataset::write_rgb(&path, &montage)?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(EXIT_OK)
}
