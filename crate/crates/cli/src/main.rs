//! `ulcerbench`: command-line front end.
//!
//! Exit codes: 0 success, 1 warnings under `--strict` or a failed gradient
//! audit, 2 usage, configuration, input or format errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "ulcerbench",
    version,
    about = "Evaluation toolkit for wound detection from probability maps"
)]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, env = "ULCERBENCH_CONFIG")]
    config: Option<PathBuf>,

    /// Raise log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Probability maps to detections (JSON Lines).
    Detect(DetectArgs),
    /// Score detections (and optionally masks) against ground truth.
    Eval(EvalArgs),
    /// Dice, Jaccard, focal and composite loss of one map/mask pair.
    Loss(LossArgs),
    /// Compare analytic loss gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Welch's t-test between two files of score samples.
    Compare(CompareArgs),
    /// Apply the seeded augmentation pipeline to an image and its mask.
    Augment(AugmentArgs),
    /// Run the blind scoring service.
    Serve(ServeArgs),
}

#[derive(Args)]
pub struct DetectOverrides {
    /// Pixel foreground threshold, inclusive [default: 0.5]
    #[arg(long)]
    pub pixel_threshold: Option<f64>,
    /// Minimum mean confidence of a region, inclusive [default: 0.6, the published setting]
    #[arg(long)]
    pub min_mean_confidence: Option<f64>,
    /// Minimum region area in pixels, inclusive [default: 200, the published setting]
    #[arg(long)]
    pub min_area: Option<u64>,
    /// Pixel connectivity of regions [default: 8]
    #[arg(long, value_parser = ["4", "8"])]
    pub connectivity: Option<String>,
}

#[derive(Args)]
pub struct DetectArgs {
    /// Dataset manifest CSV (image_id,map_path,mask_path,height,width).
    #[arg(long)]
    pub maps: PathBuf,
    /// Output detections file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for per-image work.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: u32,
    #[command(flatten)]
    pub thresholds: DetectOverrides,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ApMode {
    AllPoint,
    ElevenPoint,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Detections (JSON Lines).
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth boxes CSV.
    #[arg(long)]
    pub gt: PathBuf,
    /// Manifest whose maps are thresholded and compared with its masks.
    #[arg(long)]
    pub masks: Option<PathBuf>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit with status 1 when evaluation produced warnings.
    #[arg(long)]
    pub strict: bool,
    /// Add a generation time to the report.
    #[arg(long)]
    pub timestamps: bool,
    /// Worker threads for per-image work.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: u32,
    /// Minimum IoU for a match [default: 0.5]
    #[arg(long)]
    pub iou_threshold: Option<f64>,
    /// AP interpolation [default: all-point]
    #[arg(long, value_enum)]
    pub ap_interpolation: Option<ApMode>,
    /// Pixel threshold applied to maps from --masks [default: 0.5]
    #[arg(long)]
    pub pixel_threshold: Option<f64>,
}

#[derive(Args)]
pub struct LossArgs {
    /// Probability map (SDPM).
    #[arg(long)]
    pub map: PathBuf,
    /// Ground-truth mask (PNG).
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub timestamps: bool,
    /// Weight of the focal term [default: 1]
    #[arg(long)]
    pub alpha_sg: Option<f64>,
    /// Weight of the Dice term [default: 1]
    #[arg(long)]
    pub beta_sg: Option<f64>,
    /// Weight of the Jaccard term [default: 1]
    #[arg(long)]
    pub gamma_sg: Option<f64>,
    /// Smoothing constant of Dice and Jaccard [default: 1e-6]
    #[arg(long)]
    pub eps: Option<f64>,
    /// Focal class weight of the positive class [default: 0.25]
    #[arg(long)]
    pub focal_alpha: Option<f64>,
    /// Focal focusing exponent [default: 2]
    #[arg(long)]
    pub focal_gamma: Option<f64>,
}

#[derive(Args)]
pub struct GradcheckArgs {
    /// Random (prediction, mask) pairs.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Side length of each square pair.
    #[arg(long, default_value_t = 8)]
    pub size: usize,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub timestamps: bool,
}

#[derive(Args)]
pub struct CompareArgs {
    /// Score samples of the first run.
    #[arg(long)]
    pub a: PathBuf,
    /// Score samples of the second run.
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub timestamps: bool,
}

#[derive(Args)]
pub struct AugmentArgs {
    /// RGB input image (PNG).
    #[arg(long)]
    pub image: PathBuf,
    /// Binary mask (PNG).
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub out_image: PathBuf,
    #[arg(long)]
    pub out_mask: PathBuf,
    /// Pipeline seed [default: the config's augment.seed]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Disable every transform.
    #[arg(long)]
    pub identity: bool,
}

#[derive(Args)]
pub struct ServeArgs {
    /// Hidden ground-truth CSV; read once, never written.
    #[arg(long)]
    pub gt: PathBuf,
    /// Directory holding the submission log.
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Listening port, 0 picks a free one [default: 8080]
    #[arg(long)]
    pub port: Option<u16>,
    /// Listening address [default: 127.0.0.1]
    #[arg(long)]
    pub host: Option<std::net::IpAddr>,
    /// Largest accepted submission in bytes [default: 16 MiB]
    #[arg(long)]
    pub max_bytes: Option<usize>,
    /// Re-score all stored submissions at startup.
    #[arg(long)]
    pub rescore: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();

    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut causes = e.chain().skip(1).peekable();
            if causes.peek().is_some() {
                eprintln!("details:");
                for c in causes {
                    eprintln!("  {c}");
                }
            }
            ExitCode::from(2)
        }
    }
}
