//! `maskforge` command line: extraction, synthesis, datasets, application,
//! video, evaluation and the loss gradient check.

mod commands;

use std::ffi::OsString;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use maskforge::synth::MakeupRegion;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl From<maskforge::error::Error> for CliError {
    fn from(e: maskforge::error::Error) -> Self {
        match e {
            maskforge::error::Error::InvalidParameter(_) => CliError::Usage(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "maskforge",
    version,
    about = "Transparent makeup masks from the command line"
)]
pub struct Cli {
    /// Print a machine-readable summary on stdout.
    #[arg(long, global = true)]
    pub json: bool,

    /// Log filter; falls back to MASKFORGE_LOG, then `warn`.
    #[arg(long, global = true, value_name = "LEVEL")]
    pub log_level: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract a canonical eye-makeup mask from a made-up photo.
    Extract(ExtractArgs),
    /// Render one sampled style as a canonical mask.
    Synth(SynthArgs),
    /// Generate a paired dataset from a face manifest.
    Pair(PairArgs),
    /// Warp a canonical mask onto one image.
    Apply(ApplyArgs),
    /// Apply a canonical mask to a directory of frames.
    Video(VideoArgs),
    /// Run the paired-face transfer evaluation.
    Eval(EvalArgs),
    /// Check every loss gradient against finite differences.
    LossesCheck(LossesArgs),
    /// Write a set of synthetic bare faces with a manifest.
    Faces(FacesArgs),
}

#[derive(Debug, Clone, Args)]
pub struct LayoutArgs {
    /// Canonical layout JSON; the builtin 1024 px layout when omitted.
    #[arg(long)]
    pub canonical: Option<PathBuf>,
    /// Parsing label map JSON; CelebAMask-HQ ids when omitted.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    /// Number of k-means clusters.
    #[arg(long, default_value_t = 6)]
    pub k: usize,
    /// Most frequent clusters averaged into the skin tone.
    #[arg(long, default_value_t = 2)]
    pub s: usize,
    /// Periocular rectangle size relative to the eye box.
    #[arg(long, default_value_t = maskforge::extract::DEFAULT_ROI_MARGIN)]
    pub roi_margin: f64,
    /// Compare only the a and b channels.
    #[arg(long)]
    pub chroma_only: bool,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub photo: PathBuf,
    #[arg(long)]
    pub landmarks: PathBuf,
    #[arg(long)]
    pub parsing: PathBuf,
    /// Output RGBA PNG.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-eye statistics JSON.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// k-means++ seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub cluster: ClusterArgs,
    #[command(flatten)]
    pub layout: LayoutArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Style library directory; the builtin library when omitted.
    #[arg(long)]
    pub lib: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output RGBA PNG.
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated regions (blush, eyeshadow, eyeliner, lipstick).
    #[arg(long, value_delimiter = ',', value_parser = parse_region)]
    pub regions: Vec<MakeupRegion>,
    /// Also write the sampled style as JSON.
    #[arg(long)]
    pub style: Option<PathBuf>,
    #[command(flatten)]
    pub layout: LayoutArgs,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    /// Face manifest (JSON lines of face, landmarks, parsing).
    #[arg(long)]
    pub faces: PathBuf,
    #[arg(long)]
    pub lib: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub n_styles: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long, value_delimiter = ',', value_parser = parse_region)]
    pub regions: Vec<MakeupRegion>,
    #[command(flatten)]
    pub layout: LayoutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ApplyOpts {
    /// Multiplier on the mask alpha, in [0, 2].
    #[arg(long, default_value_t = 1.0)]
    pub alpha_scale: f64,
    /// Facial areas to keep (eyes, lips, cheeks).
    #[arg(long, value_delimiter = ',', default_value = "eyes,lips,cheeks")]
    pub regions: Vec<String>,
    /// Skip the parsing gate even when a parsing map is given.
    #[arg(long)]
    pub no_gate: bool,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    /// Canonical RGBA mask PNG.
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub frame: PathBuf,
    #[arg(long)]
    pub landmarks: PathBuf,
    #[arg(long)]
    pub parsing: Option<PathBuf>,
    /// Output PNG.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub apply: ApplyOpts,
    #[command(flatten)]
    pub layout: LayoutArgs,
}

#[derive(Debug, Args)]
pub struct VideoArgs {
    #[arg(long)]
    pub mask: PathBuf,
    /// Directory of `<stem>.png`, `<stem>.json` and optional `<stem>_parsing.png`.
    #[arg(long)]
    pub frames: PathBuf,
    /// Output frame directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Timing report path; `<out>/timing.json` when omitted.
    #[arg(long)]
    pub timing: Option<PathBuf>,
    /// Landmark smoothing factor in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[command(flatten)]
    pub apply: ApplyOpts,
    #[command(flatten)]
    pub layout: LayoutArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Face manifest; every entry needs a parsing map.
    #[arg(long)]
    pub faces: PathBuf,
    #[arg(long)]
    pub lib: Option<PathBuf>,
    /// Report JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-pair CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub n_pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Transfer the ground-truth mask instead of extracting.
    #[arg(long)]
    pub oracle_gt: bool,
    /// Gate the transferred mask with the target's parsing map.
    #[arg(long)]
    pub gate: bool,
    #[arg(long, value_delimiter = ',', value_parser = parse_region, default_value = "eyeshadow")]
    pub regions: Vec<MakeupRegion>,
    #[command(flatten)]
    pub cluster: ClusterArgs,
    #[command(flatten)]
    pub layout: LayoutArgs,
}

#[derive(Debug, Args)]
pub struct LossesArgs {
    #[arg(long, default_value_t = maskforge::losses::LOSS_VECTOR_SEEDS)]
    pub seeds: usize,
    /// Use mean instead of sum reductions.
    #[arg(long)]
    pub normalized: bool,
    /// Loss-vector JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FacesArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 256)]
    pub size: usize,
    #[command(flatten)]
    pub layout: LayoutArgs,
}

fn parse_region(s: &str) -> Result<MakeupRegion, String> {
    MakeupRegion::parse(s.trim()).ok_or_else(|| format!("unknown region `{s}`"))
}

fn init_logging(level: Option<&str>) {
    let env = env_logger::Env::new().filter_or("MASKFORGE_LOG", "warn");
    let mut b = env_logger::Builder::from_env(env);
    if let Some(l) = level {
        b.parse_filters(l);
    }
    let _ = b.format_timestamp(None).try_init();
}

/// Closed pipes on stdout are not an error.
fn print_stdout(s: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{s}").and_then(|_| out.flush());
}

/// Parses `argv` (program name first) and runs the subcommand. Returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.log_level.as_deref());
    let json = cli.json;
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| commands::dispatch(cli.command)));
    match outcome {
        Ok(Ok(summary)) => {
            if json {
                print_stdout(&serde_json::to_string_pretty(&summary).expect("summary serializes"));
            } else if let Some(line) = summary.get("message").and_then(|m| m.as_str()) {
                eprintln!("{line}");
            }
            EXIT_OK
        }
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            if json {
                let kind = match e {
                    CliError::Usage(_) => "usage",
                    CliError::Data(_) => "data",
                    CliError::Internal(_) => "internal",
                };
                print_stdout(
                    &serde_json::json!({ "error": e.to_string(), "kind": kind }).to_string(),
                );
            }
            e.exit_code()
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            eprintln!("internal error: {msg}");
            EXIT_INTERNAL
        }
    }
}
