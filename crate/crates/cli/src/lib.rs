//! `bgmem`: ingest conversations, query a memory snapshot, run the benchmark
//! harness, or serve the engine over HTTP.

pub mod commands;
pub mod config;
pub mod engine;
pub mod report;
pub mod serve;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bgmem_core::llm::BackendKind;
use config::{AppConfig, Layers};

#[derive(Debug, Parser)]
#[command(name = "bgmem", version, about = "Long-term dialogue memory: ingest, query, evaluate, serve")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    /// Rule-based extractor, planner and answerer with hashed embeddings.
    Mock,
    /// OpenAI-compatible chat and embeddings endpoints.
    Remote,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. --set stop.lambda_knee=0.2. Repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    pub set: Vec<String>,
    /// LLM and embedding implementation.
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendArg>,
    /// Write every LLM request and response under DIR (default llm-trace).
    #[arg(long, global = true, value_name = "DIR", num_args = 0..=1, default_missing_value = "llm-trace")]
    pub trace_llm: Option<PathBuf>,
    /// Memory snapshot file to read (query, serve) or write (ingest, serve).
    #[arg(long, global = true, value_name = "FILE")]
    pub snapshot: Option<PathBuf>,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build or extend memory snapshots from a conversation file.
    Ingest(IngestArgs),
    /// Answer a question from a snapshot.
    Query(QueryArgs),
    /// Run the benchmark harness over a dataset.
    Eval(EvalArgs),
    /// Evaluate once per value of one stopping parameter.
    Sweep(SweepArgs),
    /// Serve the engine over HTTP.
    Serve(ServeArgs),
    /// Print the effective configuration.
    Config(ConfigArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Benchmark file, JSON array of sessions, or a single session.
    pub input: PathBuf,
    /// Only this conversation of a benchmark file.
    #[arg(long, value_name = "ID")]
    pub conversation: Option<String>,
    /// Directory for per-conversation snapshots (overrides paths.snapshot_dir).
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    pub question: String,
    /// Print the plan, ranked scores and stop trace as JSON.
    #[arg(long)]
    pub explain: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Benchmark file in the LOCOMO layout.
    pub dataset: PathBuf,
    /// Report directory (overrides paths.out_dir).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Skip the judge model.
    #[arg(long)]
    pub no_judge: bool,
    /// Fixed top-k selection instead of adaptive stopping.
    #[arg(long, value_name = "K")]
    pub top_k: Option<usize>,
    /// Also sweep one parameter: lambda_knee=0.02..0.3, precision_scale=0.5,0.7,0.9 or name=a..b:step.
    #[arg(long, value_name = "NAME=GRID")]
    pub sweep: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Benchmark file in the LOCOMO layout.
    pub dataset: PathBuf,
    /// lambda_knee, precision_scale or judgment_scale with a grid, e.g. precision_scale=0.5..0.9:0.1.
    #[arg(long, value_name = "NAME=GRID")]
    pub param: String,
    /// Directory for the sweep tables (overrides paths.out_dir).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Listen address (overrides serve.bind).
    #[arg(long, value_name = "ADDR")]
    pub bind: Option<String>,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Print every key, optional ones included, instead of the effective values.
    #[arg(long)]
    pub example: bool,
    /// List the settable keys with their environment variable names.
    #[arg(long)]
    pub keys: bool,
}

/// A failure with its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure { code: 1, message: format!("{e:#}") }
    }
}

impl GlobalArgs {
    /// Flag layer as `section.key=value` overrides, most specific last.
    pub fn overrides(&self) -> Vec<String> {
        let mut o = self.set.clone();
        if let Some(dir) = &self.trace_llm {
            o.push(format!("paths.trace_dir={}", dir.display()));
        }
        o
    }

    pub fn resolve(&self, env: Vec<(String, String)>) -> Result<AppConfig, Failure> {
        let layers = Layers { file: self.config.as_deref(), env, overrides: self.overrides() };
        let mut cfg = config::load(&layers).map_err(Failure::usage)?;
        if let Some(b) = self.backend {
            cfg.set_backend(match b {
                BackendArg::Mock => BackendKind::Mock,
                BackendArg::Remote => BackendKind::Remote,
            });
        }
        cfg.validate().map_err(Failure::usage)?;
        Ok(cfg)
    }
}

/// Parse arguments and run; returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging(cli.global.verbose);
    match commands::dispatch(&cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.code
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}
