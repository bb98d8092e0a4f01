//! `snaketext` command-line entry point.
//!
//! Exit codes: 0 success, 1 F1 below `--assert-f1`, 2 usage or I/O error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use snaketext::ShapingConfig;

#[derive(Debug, Parser)]
#[command(
    name = "snaketext",
    version,
    about = "Text shaping, evaluation and fixtures for low-light scene text detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn head maps into text polygons (annotation format).
    Shape(ShapeArgs),
    /// Match prediction files against ground truth and report P/R/F1.
    Eval(EvalArgs),
    /// Time the FPS shaping path against an NMS baseline on random candidates.
    Bench(BenchArgs),
    /// Generate synthetic maps, ground truth and a dim image.
    Synth(SynthArgs),
    /// Draw polygon outlines over a PGM image, writing a PPM.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
struct ShapingFlags {
    /// Text-region score threshold.
    #[arg(long, default_value_t = 0.5)]
    text_thresh: f64,
    /// Centre-region score threshold.
    #[arg(long, default_value_t = 0.5)]
    center_thresh: f64,
    /// Width of each component rectangle, map pixels.
    #[arg(long, default_value_t = 4.0)]
    rect_width: f64,
    /// Maximum centres sampled per centre component.
    #[arg(long, default_value_t = 64)]
    fps_budget: usize,
    /// Stop sampling once every candidate is closer than this [default: rect-width / 2].
    #[arg(long)]
    fps_stop_dist: Option<f64>,
    /// Side of the square closing element (odd).
    #[arg(long, default_value_t = 5)]
    close_kernel: usize,
    /// Drop regions with fewer pixels than this.
    #[arg(long, default_value_t = 16.0)]
    min_area: f64,
    /// Treat the x/y channels as offsets from the pixel centre.
    #[arg(long)]
    offset_mode: bool,
    /// Multiply output coordinates by this factor.
    #[arg(long, default_value_t = 1.0)]
    output_scale: f64,
}

impl ShapingFlags {
    fn config(&self) -> ShapingConfig {
        ShapingConfig {
            text_thresh: self.text_thresh,
            center_thresh: self.center_thresh,
            rect_width: self.rect_width,
            fps_budget: self.fps_budget,
            fps_stop_dist: self.fps_stop_dist.unwrap_or(self.rect_width / 2.0),
            close_kernel: self.close_kernel,
            min_area: self.min_area,
            offset_mode: self.offset_mode,
            output_scale: self.output_scale,
        }
    }
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["maps", "image"]))]
struct ShapeArgs {
    /// TMAP file with text, center, x, y, h, (w,) theta sections.
    #[arg(long)]
    maps: Option<PathBuf>,
    /// Output annotation file.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    shaping: ShapingFlags,
    /// EXPERIMENTAL: run a PGM image through an untrained backbone stub and
    /// the fusion network. The output is not a meaningful detection.
    #[arg(long)]
    image: Option<PathBuf>,
    /// EXPERIMENTAL: square frame the image is resized to (multiple of 32).
    #[arg(long, default_value_t = 640)]
    frame: usize,
    /// EXPERIMENTAL: pyramid channels of the stub network.
    #[arg(long, default_value_t = 8)]
    channels: usize,
    /// EXPERIMENTAL: seed of the stub network parameters.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Directory of prediction annotation files (*.txt).
    #[arg(long)]
    pred: PathBuf,
    /// Directory of ground-truth annotation files (*.txt), same file names.
    #[arg(long)]
    gt: PathBuf,
    /// IoU needed for a match.
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    /// Exit with status 1 when F1 (a fraction) is below this.
    #[arg(long)]
    assert_f1: Option<f64>,
    /// Worker threads for per-image matching.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Treat ground truth flagged `#ignore` as "don't care".
    #[arg(long)]
    honor_ignore: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Number of random candidate centre pixels.
    #[arg(long, default_value_t = 2000)]
    n_candidates: usize,
    /// Timed repetitions of each path.
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// IoU threshold of the NMS baseline.
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SynthKindArg {
    Straight,
    Sinusoid,
    TwoBand,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Draw a random spec of this family on a 128x192 frame instead of
    /// using the band flags.
    #[arg(long, value_enum)]
    kind: Option<SynthKindArg>,
    /// Frame height, px.
    #[arg(long, default_value_t = 128)]
    height: usize,
    /// Frame width, px.
    #[arg(long, default_value_t = 192)]
    width: usize,
    /// Left end of the centreline.
    #[arg(long, default_value_t = 20.0)]
    x0: f64,
    /// Right end of the centreline.
    #[arg(long, default_value_t = 170.0)]
    x1: f64,
    /// Baseline y of the centreline.
    #[arg(long, default_value_t = 64.0)]
    y0: f64,
    /// Sinusoid amplitude, px (0 gives a straight band).
    #[arg(long, default_value_t = 0.0)]
    amplitude: f64,
    /// Sinusoid period, px.
    #[arg(long, default_value_t = 120.0)]
    period: f64,
    /// Sinusoid phase, radians.
    #[arg(long, default_value_t = 0.0)]
    phase: f64,
    /// Band height at the left end, px.
    #[arg(long, default_value_t = 12.0)]
    band_height: f64,
    /// Band height at the right end [default: band-height].
    #[arg(long)]
    band_height_end: Option<f64>,
    /// Gaussian noise sigma on the score maps and image.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Dimming gain in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (created); receives maps.tmap, gt.txt, image.pgm.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// Binary PGM (P5) image.
    #[arg(long)]
    image: PathBuf,
    /// Annotation file of polygons to outline.
    #[arg(long)]
    polys: PathBuf,
    /// Output PPM (P6).
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    // clap exits with 2 on usage errors and 0 for --help / --version
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Shape(a) => commands::shape(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Render(a) => commands::render(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
