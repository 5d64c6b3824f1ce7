//! Argument handling for the `salmanip` binary.
//!
//! Exit codes: 0 on success, 1 on bad input (flags, unreadable or
//! mismatched files), 2 when the computation itself fails.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use salmanip_core::image::io;
use salmanip_core::metrics::{evaluate_corpus, Metric};
use salmanip_core::patchdb::Thresholds;
use salmanip_core::pipeline::{compute_saliency_file, run_with_setup};
use salmanip_core::saliency::SaliencyConfig;
use salmanip_core::setup::{build_setup, contrast_region, contrast_region_of, SetupMask};
use salmanip_core::{Error, ManipulationConfig, Mode, RgbImage};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "salmanip", version, about = "Saliency-driven image manipulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Make the masked region stand out.
    Enhance(ManipArgs),
    /// Make the masked region blend in.
    Attenuate(ManipArgs),
    /// Suppress distractors outside the mask.
    Declutter(ManipArgs),
    /// Write the saliency map of an image.
    Saliency(SaliencyArgs),
    /// Score saliency maps against ground-truth masks.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct ManipArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Binary region mask, 8-bit gray, >= 128 is inside.
    #[arg(long, required_unless_present = "setup_mask")]
    pub mask: Option<PathBuf>,
    /// Ternary labeling (0 = decrease, 128 = keep, 255 = increase); overrides the mode's setup.
    #[arg(long)]
    pub setup_mask: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0.6, allow_negative_numbers = true)]
    pub delta_s: f64,
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
    pub beta_top: f64,
    /// Synthesis patch width.
    #[arg(long, default_value_t = 7)]
    pub patch_size: usize,
    /// Saliency patch width.
    #[arg(long, default_value_t = 5)]
    pub saliency_patch: usize,
    #[arg(long, default_value_t = 150)]
    pub coarse_width: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub iters_coarse: usize,
    #[arg(long, default_value_t = 5)]
    pub iters_fine: usize,
    /// Directory for input_saliency.png and output_saliency.png.
    #[arg(long)]
    pub save_saliency: Option<PathBuf>,
    /// Write the run report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write the per-iteration trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Validate inputs and print the resolved configuration only.
    #[arg(long)]
    pub dry_run: bool,
    /// Debug: hold thresholds at TAU_PLUS,TAU_MINUS instead of searching.
    #[arg(long, value_name = "TAU_PLUS,TAU_MINUS", hide = true)]
    pub pin_thresholds: Option<String>,
}

#[derive(Debug, Args)]
pub struct SaliencyArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub saliency_patch: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred_dir: PathBuf,
    #[arg(long)]
    pub gt_dir: PathBuf,
    #[arg(long, default_value = "cc")]
    pub metric: String,
    /// CSV destination; printed to stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// A failure paired with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(e: impl std::fmt::Display) -> Self {
        Self { code: EXIT_INPUT, message: e.to_string() }
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        Self { code: EXIT_RUNTIME, message: e.to_string() }
    }
}

/// Input-shaped errors map to 1 even when raised deep inside a run.
fn classify(e: Error) -> Failure {
    match e {
        Error::InvalidParameter(_)
        | Error::DimensionMismatch { .. }
        | Error::DegenerateRegion
        | Error::ImageTooSmall { .. }
        | Error::Image(_)
        | Error::Io(_) => Failure::input(e),
        _ => Failure::runtime(e),
    }
}

impl ManipArgs {
    pub fn config(&self) -> Result<ManipulationConfig, Failure> {
        let mut cfg = ManipulationConfig {
            delta_s: self.delta_s,
            lambda: self.lambda,
            eta: self.eta,
            epsilon: self.epsilon,
            beta_top: self.beta_top,
            coarse_width: self.coarse_width,
            seed: self.seed,
            iters_coarse: self.iters_coarse,
            iters_fine: self.iters_fine,
            ..ManipulationConfig::default()
        };
        cfg.synth.patch_size = self.patch_size;
        cfg.sal.patch_size = self.saliency_patch;
        if let Some(raw) = &self.pin_thresholds {
            cfg.pinned_thresholds = Some(parse_thresholds(raw)?);
        }
        cfg.validate().map_err(classify)?;
        Ok(cfg)
    }
}

fn parse_thresholds(raw: &str) -> Result<Thresholds, Failure> {
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    let parse = |s: &str| s.parse::<f64>().ok().filter(|v| (0.0..=1.0).contains(v));
    match parts.as_slice() {
        [p, m] => match (parse(p), parse(m)) {
            (Some(p), Some(m)) => Ok(Thresholds::new(p, m)),
            _ => Err(Failure::input("pin-thresholds values must be in [0,1]")),
        },
        _ => Err(Failure::input("pin-thresholds expects TAU_PLUS,TAU_MINUS")),
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn read_rgb(path: &Path) -> Result<RgbImage, Failure> {
    io::decode_rgb_png(&read_file(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))
}

fn saliency_png(img: &RgbImage, cfg: &SaliencyConfig) -> Result<Vec<u8>, Failure> {
    let s = compute_saliency_file(img, cfg).map_err(classify)?;
    io::encode_gray_png(s.width(), s.height(), &s.to_gray8()).map_err(Failure::runtime)
}

fn manipulate(mode: Mode, args: &ManipArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = args.config()?;
    let input = read_rgb(&args.input)?;
    let dims = input.dimensions();
    let mask = match &args.mask {
        Some(p) => Some(io::decode_mask_png(&read_file(p)?).map_err(classify)?),
        None => None,
    };
    let (setup, region) = match &args.setup_mask {
        Some(p) => {
            let (w, h, gray) = io::decode_gray_png(&read_file(p)?).map_err(classify)?;
            let setup = SetupMask::from_gray(w, h, &gray).map_err(classify)?;
            let region = match &mask {
                Some(m) => contrast_region(m, mode),
                None => contrast_region_of(&setup),
            };
            (setup, region)
        }
        None => {
            let mask = mask.as_ref().expect("clap requires --mask without --setup-mask");
            (build_setup(mask, mode).map_err(classify)?, contrast_region(mask, mode))
        }
    };
    for d in [setup.dimensions(), region.dimensions()] {
        if d != dims {
            return Err(Failure::input(format!(
                "mask size mismatch: image is {}x{}, mask is {}x{}",
                dims.0, dims.1, d.0, d.1
            )));
        }
    }
    if !region.is_proper() {
        return Err(classify(Error::DegenerateRegion));
    }

    if args.dry_run {
        let json = serde_json::to_string_pretty(&cfg).map_err(Failure::runtime)?;
        writeln!(out, "{json}").map_err(Failure::runtime)?;
        return Ok(());
    }

    let run = run_with_setup(&input, &setup, &region, &cfg, &mut |_| {}).map_err(classify)?;
    write_file(&args.output, &io::encode_rgb_png(&run.image).map_err(Failure::runtime)?)?;
    if let Some(dir) = &args.save_saliency {
        std::fs::create_dir_all(dir).map_err(Failure::runtime)?;
        write_file(&dir.join("input_saliency.png"), &saliency_png(&input, &cfg.sal)?)?;
        write_file(&dir.join("output_saliency.png"), &saliency_png(&run.image, &cfg.sal)?)?;
    }
    if let Some(path) = &args.report {
        let json = serde_json::to_string_pretty(&run.report).map_err(Failure::runtime)?;
        write_file(path, json.as_bytes())?;
    }
    if let Some(path) = &args.trace {
        write_file(path, run.report.trace_csv().as_bytes())?;
    }
    let r = &run.report;
    writeln!(
        out,
        "{}: psi {:.4} -> {:.4} ({} coarse iterations)",
        r.termination.as_str(),
        r.initial_psi,
        r.final_psi,
        r.trace.len() - 1
    )
    .map_err(Failure::runtime)
}

fn saliency(args: &SaliencyArgs) -> Result<(), Failure> {
    let cfg = SaliencyConfig { patch_size: args.saliency_patch, ..SaliencyConfig::default() };
    cfg.validate().map_err(classify)?;
    let input = read_rgb(&args.input)?;
    write_file(&args.output, &saliency_png(&input, &cfg)?)
}

fn eval(args: &EvalArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let metric: Metric = args.metric.parse().map_err(classify)?;
    for dir in [&args.pred_dir, &args.gt_dir] {
        if !dir.is_dir() {
            return Err(Failure::input(format!("not a directory: {}", dir.display())));
        }
    }
    let report = evaluate_corpus(&args.pred_dir, &args.gt_dir, metric).map_err(classify)?;
    let csv = report.to_csv();
    match &args.report {
        Some(p) => write_file(p, csv.as_bytes())?,
        None => out.write_all(csv.as_bytes()).map_err(Failure::runtime)?,
    }
    if report.scores.is_empty() {
        return Err(Failure::input("no matching image pairs"));
    }
    Ok(())
}

/// Parses `argv` (including the program name) and executes it.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Enhance(a) => manipulate(Mode::Enhance, a, out),
        Command::Attenuate(a) => manipulate(Mode::Attenuate, a, out),
        Command::Declutter(a) => manipulate(Mode::Declutter, a, out),
        Command::Saliency(a) => saliency(a),
        Command::Eval(a) => eval(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
