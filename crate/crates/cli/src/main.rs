mod cmd;
mod dataset;
mod failure;
mod report;

use clap::{Args, Parser, Subcommand, ValueEnum};
use failure::{usage, Failure, Outcome};
use report::Report;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "g4d", version, about = "4D Gaussian-splat toolkit: synthesis, rendering, interpolation and evaluation")]
struct Cli {
    /// Emit the report as JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Write the report here instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic articulated scene with ground truth.
    Synth(SynthArgs),
    /// Render one view of a Gaussian frame.
    Render(RenderArgs),
    /// Gaussians at a novel time between two adjacent frames.
    Interp(InterpArgs),
    /// Metric gauge and camera loss between predicted and true cameras.
    Gauge(GaugeArgs),
    /// Self-supervision losses on a synthesized dataset.
    Losses(LossesArgs),
    /// Evaluation protocols on a synthesized dataset.
    Eval(EvalArgs),
    /// Oracle and invariant checks.
    Selftest,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Scene configuration (TOML); defaults apply to missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Gaussian raster side relative to the image side.
    #[arg(long)]
    pub density: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum RendererArg {
    Tiled,
    Reference,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    #[arg(long)]
    pub frame: PathBuf,
    #[arg(long)]
    pub cameras: PathBuf,
    #[arg(long)]
    pub view: usize,
    /// Camera-set index; defaults to the frame's timestamp.
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long, default_value = "0,0,0", value_name = "R,G,B")]
    pub bg: String,
    /// `.png` for an 8-bit preview, anything else for a float raster.
    #[arg(long)]
    pub out: PathBuf,
    /// Output size; defaults to the size implied by the principal point.
    #[arg(long, value_name = "WxH")]
    pub size: Option<String>,
    #[arg(long, value_enum, default_value_t = RendererArg::Tiled)]
    pub renderer: RendererArg,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowArg {
    /// Stored ground-truth optical flow.
    Gt,
    /// Motion projected through the cameras.
    Project,
}

#[derive(Args, Debug, Clone)]
pub struct TimeArgs {
    /// Dataset directory written by `synth`.
    #[arg(long)]
    pub frames: PathBuf,
    /// Novel time in [t-1, t].
    #[arg(long, allow_hyphen_values = true)]
    pub t_prime: Option<f64>,
    /// Later frame index; defaults to ceil(t').
    #[arg(long)]
    pub t: Option<usize>,
    /// Occlusion threshold on the dual-consistency distance.
    #[arg(long, default_value_t = 0.05, allow_hyphen_values = true)]
    pub tau: f64,
    /// `avg` or `mlp:<weights file>`.
    #[arg(long, default_value = "avg")]
    pub fusion: String,
    #[arg(long, value_enum, default_value_t = FlowArg::Gt)]
    pub flows: FlowArg,
}

#[derive(Args, Debug)]
pub struct InterpArgs {
    #[command(flatten)]
    pub time: TimeArgs,
    /// `.ply` for a point cloud, anything else for a Gaussian frame.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GaugeArgs {
    #[arg(long)]
    pub pred_cams: PathBuf,
    #[arg(long)]
    pub gt_cams: PathBuf,
    /// Predicted gauge; adds the camera loss to the report.
    #[arg(long, allow_hyphen_values = true)]
    pub pred_gauge: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossMode {
    Retarget,
    Flow,
    Fusion,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MotionArg {
    Gt,
    Zero,
}

#[derive(Args, Debug)]
pub struct LossesArgs {
    #[arg(long, value_enum)]
    pub mode: LossMode,
    #[command(flatten)]
    pub time: TimeArgs,
    /// Motion used as the prediction.
    #[arg(long, value_enum, default_value_t = MotionArg::Gt)]
    pub motion: MotionArg,
    #[arg(long, default_value_t = 0.25, allow_hyphen_values = true)]
    pub lambda_ssim: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    Nvs,
    Motion,
    Metric,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum DirectionArg {
    Backward,
    Forward,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub mode: EvalMode,
    #[command(flatten)]
    pub time: TimeArgs,
    #[arg(long, value_enum, default_value_t = MotionArg::Gt)]
    pub motion: MotionArg,
    /// Motion direction; defaults to forward when the next frame exists.
    #[arg(long, value_enum)]
    pub direction: Option<DirectionArg>,
    /// Constant offset added to the x component of every predicted motion.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub perturb: f64,
    /// Predicted metric gauge; defaults to the one recovered from the cameras.
    #[arg(long, allow_hyphen_values = true)]
    pub gauge: Option<f64>,
}

fn configure_threads() -> Outcome {
    let Ok(v) = std::env::var("G4D_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("G4D_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Internal(format!("thread pool: {e}")))
}

fn dispatch(cli: &Cli) -> Outcome {
    configure_threads()?;
    let mut report = Report::new();
    let result = match &cli.command {
        Command::Synth(a) => cmd::synth::run(a, &mut report),
        Command::Render(a) => cmd::render::run(a, &mut report),
        Command::Interp(a) => cmd::interp::run(a, &mut report),
        Command::Gauge(a) => cmd::gauge::run(a, &mut report),
        Command::Losses(a) => cmd::losses::run(a, &mut report),
        Command::Eval(a) => cmd::eval::run(a, &mut report),
        Command::Selftest => cmd::selftest::run(&mut report),
    };
    // A failed self-check still reports which checks failed.
    if result.is_ok() || matches!(cli.command, Command::Selftest) {
        report.emit(cli.json, cli.report.as_deref())?;
    }
    result
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = std::panic::catch_unwind(|| dispatch(&cli))
        .unwrap_or_else(|_| Err(Failure::Internal("panic".into())));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("g4d: {f}");
            ExitCode::from(f.code() as u8)
        }
    }
}
