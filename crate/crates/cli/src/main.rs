//! `dialsynth` command-line entry point.
//!
//! Exit codes: 0 success, 1 usage, 2 config, 3 partial job, 4 validation
//! failure, 5 I/O.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Config(String),
    Partial(String),
    Validation(String),
    Io(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Config(_) => 2,
            Failure::Partial(_) => 3,
            Failure::Validation(_) => 4,
            Failure::Io(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Config(m) | Failure::Partial(m) | Failure::Validation(m) | Failure::Io(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(name = "dialsynth", version, about = "Generate, check and evaluate synthetic emotion-labelled dialogue")]
struct Cli {
    /// TOML config file; flags and environment variables take precedence over it.
    #[arg(long, global = true, env = "DIALSYNTH_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a natural or balanced dataset through a chat-completion endpoint.
    Generate(GenerateArgs),
    /// Re-check every record invariant of a dataset file.
    Validate(ValidateArgs),
    /// Split a dataset into train, validation and test files.
    Split(SplitArgs),
    /// Print the label distribution and write a log-count histogram.
    Stats(StatsArgs),
    /// Rank models across test sets and compare against each baseline.
    Rank(RankArgs),
    /// Print the prompt a generation job would send.
    Prompt(PromptArgs),
    /// Serve the fixture-driven mock chat-completion endpoint.
    MockServer(MockServerArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Natural,
    Balanced,
}

#[derive(Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub family: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Natural)]
    pub mode: ModeArg,
    /// Natural mode: number of dialogues.
    #[arg(long)]
    pub count: Option<usize>,
    /// Balanced mode: dialogues per label.
    #[arg(long)]
    pub quota: Option<usize>,
    /// Endpoint base URL, or `mock:` / `mock:<fixture.json>` for the in-process mock.
    #[arg(long, env = "DIALSYNTH_ENDPOINT")]
    pub endpoint: Option<String>,
    #[arg(long, env = "DIALSYNTH_MODEL")]
    pub model: Option<String>,
    /// Base seed; dialogue i uses seed + i.
    #[arg(long, env = "DIALSYNTH_SEED")]
    pub seed: Option<u64>,
    /// Dataset path (default `<out-dir>/<family>-<mode>.jsonl`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = "DIALSYNTH_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// Natural mode over-generation factor.
    #[arg(long)]
    pub factor: Option<f64>,
    /// Balanced mode retries per slot.
    #[arg(long)]
    pub retries: Option<u32>,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    /// Directory of template overrides, laid out as `<family>/<name>.txt`.
    #[arg(long, env = "DIALSYNTH_TEMPLATES")]
    pub templates: Option<PathBuf>,
}

#[derive(Args)]
pub struct ValidateArgs {
    pub path: PathBuf,
    /// Family to check against (default: the first record's).
    #[arg(long)]
    pub family: Option<String>,
}

#[derive(Args)]
pub struct SplitArgs {
    pub path: PathBuf,
    /// Train, validation and test fractions.
    #[arg(long, default_value = "0.8,0.1,0.1")]
    pub ratios: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub family: Option<String>,
}

#[derive(Args)]
pub struct StatsArgs {
    pub path: PathBuf,
    #[arg(long)]
    pub family: Option<String>,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args)]
pub struct RankArgs {
    /// Score table: header of column ids, one row per test set.
    pub scores: PathBuf,
    /// Column groups: `column,architecture,regime` rows.
    #[arg(long)]
    pub groups: PathBuf,
    /// Bonferroni multiplier; calibrated when omitted.
    #[arg(long)]
    pub m: Option<u32>,
    /// Write the machine-readable report here.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Write the calibration methodology note here.
    #[arg(long)]
    pub methodology: Option<PathBuf>,
}

#[derive(Args)]
pub struct PromptArgs {
    #[arg(long)]
    pub family: String,
    /// Target label; produces the balanced variant.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, env = "DIALSYNTH_TEMPLATES")]
    pub templates: Option<PathBuf>,
}

#[derive(Args)]
pub struct MockServerArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// 0 picks a free port.
    #[arg(long, default_value_t = 8089)]
    pub port: u16,
    /// Fixture file (default: the bundled one).
    #[arg(long)]
    pub fixture: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let config = cli.config.as_deref();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(config, a),
        Command::Validate(a) => commands::validate(config, a),
        Command::Split(a) => commands::split(config, a),
        Command::Stats(a) => commands::stats(config, a),
        Command::Rank(a) => commands::rank(a),
        Command::Prompt(a) => commands::prompt(config, a),
        Command::MockServer(a) => commands::mock_server(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
