//! `silicon-entropy`: drive the DRAM security-primitive simulator from the
//! command line.
//!
//! Exit codes: 0 success/accept, 1 domain rejection (authentication or suite
//! failure), 2 usage/config error, 3 I/O error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;

/// Overrides the config seed when set; the --seed flag beats both.
pub const SEED_ENV_VAR: &str = "SILICON_ENTROPY_SEED";

#[derive(Parser)]
#[command(
    name = "silicon-entropy",
    version,
    about = "Behavioral DRAM simulator with startup-value fingerprinting, true-random pipelines, and a built-in randomness test suite",
    propagate_version = true
)]
struct Cli {
    /// Experiment config file (`section.key = value` lines); defaults apply
    /// when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Device seed override (precedence: flag > SILICON_ENTROPY_SEED > config).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Suppress timestamps so repeated runs are byte-identical.
    #[arg(long, global = true)]
    deterministic: bool,

    /// Worker threads for commands that process independent inputs.
    #[arg(long, global = true, value_name = "N", default_value_t = 1)]
    jobs: usize,

    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the device descriptor, optionally with a startup-image bitmap.
    Simulate(SimulateArgs),
    /// Enroll stable cells over repeated startup reads; write mask and fingerprint.
    Enroll,
    /// Compare a candidate fingerprint against a stored one (exit 0 accept, 1 reject).
    Auth(AuthArgs),
    /// Run a TRNG pipeline and write the bitstream plus its run log.
    Trng(TrngArgs),
    /// Run the randomness test suite on bitstream files (exit 1 if any fails).
    Nist(NistArgs),
    /// Replay an aging campaign and write per-epoch stable fractions.
    Aging,
    /// Solve for the per-read noise that hits a target stable-bit fraction.
    Calibrate(CalibrateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Also render one startup read as a PGM bitmap (white = 0, black = 1).
    #[arg(long)]
    bitmap: bool,
    /// Bits per bitmap row; a final partial row is padded white.
    #[arg(long, value_name = "BITS")]
    row_width: Option<usize>,
}

#[derive(Args)]
struct AuthArgs {
    /// Candidate fingerprint JSON.
    candidate: PathBuf,
    /// Stored (enrolled) fingerprint JSON.
    stored: PathBuf,
    /// Fractional Hamming-distance acceptance threshold.
    #[arg(long, value_name = "FRACTION")]
    threshold: Option<f64>,
}

#[derive(Args)]
struct TrngArgs {
    /// Pipeline to run: remanence | startup | dvft.
    #[arg(long, value_name = "SOURCE")]
    source: Option<String>,
    /// Output size in bits.
    #[arg(long, value_name = "BITS")]
    target_bits: Option<usize>,
}

#[derive(Args)]
struct NistArgs {
    /// Bitstream files (packed with length header, or ASCII '0'/'1').
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Per-test acceptance level.
    #[arg(long, value_name = "ALPHA")]
    alpha: Option<f64>,
    /// Block-frequency block size M.
    #[arg(long, value_name = "M")]
    block_m: Option<usize>,
    /// Serial pattern length m.
    #[arg(long, value_name = "M")]
    serial_m: Option<usize>,
    /// Approximate-entropy pattern length m.
    #[arg(long, value_name = "M")]
    apen_m: Option<usize>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Target stable-bit fraction.
    #[arg(long, value_name = "FRACTION", default_value_t = 0.90)]
    target: f64,
    /// Reads per stability measurement.
    #[arg(long, value_name = "N", default_value_t = 144)]
    reads: usize,
    /// Also measure the calibrated device by simulation.
    #[arg(long)]
    simulate: bool,
}

pub enum CliError {
    Usage(String),
    Io { path: PathBuf, message: String },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Io { path, message } => write!(f, "{}: {message}", path.display()),
        }
    }
}

impl From<silicon_entropy_core::Error> for CliError {
    fn from(e: silicon_entropy_core::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub struct Ctx {
    pub cfg: ExperimentConfig,
    pub out_dir: PathBuf,
    pub deterministic: bool,
    pub jobs: usize,
}

fn load_context(cli: &Cli) -> Result<Ctx, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            ExperimentConfig::from_file(path).map_err(|e| CliError::Usage(e.to_string()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Ok(v) = std::env::var(SEED_ENV_VAR) {
        cfg.seed = v.parse::<u64>().map_err(|e| {
            CliError::Usage(format!("bad {SEED_ENV_VAR} value `{v}`: {e}"))
        })?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.jobs == 0 {
        return Err(CliError::Usage("--jobs must be >= 1".into()));
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::Io {
        path: cli.out.clone(),
        message: format!("cannot create output directory: {e}"),
    })?;
    Ok(Ctx {
        cfg,
        out_dir: cli.out.clone(),
        deterministic: cli.deterministic,
        jobs: cli.jobs,
    })
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let ctx = load_context(&cli)?;
    match &cli.command {
        Command::Simulate(args) => commands::simulate(&ctx, args.bitmap, args.row_width),
        Command::Enroll => commands::enroll(&ctx),
        Command::Auth(args) => commands::auth(&ctx, &args.candidate, &args.stored, args.threshold),
        Command::Trng(args) => commands::trng(&ctx, args.source.as_deref(), args.target_bits),
        Command::Nist(args) => commands::nist(
            &ctx,
            &args.inputs,
            args.alpha,
            args.block_m,
            args.serial_m,
            args.apen_m,
        ),
        Command::Aging => commands::aging(&ctx),
        Command::Calibrate(args) => {
            commands::calibrate(&ctx, args.target, args.reads, args.simulate)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
