//! The `wtacrs` command line: estimates, variance tables, concentration
//! curves, training comparisons and memory profiles.
//!
//! Settings resolve as built-in defaults, then `--preset`, then the
//! command's table in the `--config` TOML file, then flags. Outputs embed the
//! tool version, the resolved config and the seed, and are byte-identical for
//! identical settings. Exit codes: 0 success, 1 runtime failure, 2
//! configuration error.

pub mod commands;
pub mod config;
pub mod output;
pub mod tasks;
pub mod train;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::autodiff::SamplingMode;
use crate::estimators::EstimatorKind;
use config::{resolve, DistributionKind, TaskKind};
use output::Format;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "wtacrs", version, about = "Column-row sampling estimators and sampled backpropagation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One sampled estimate of a matrix product against the exact result.
    Estimate(EstimateArgs),
    /// Monte-Carlo bias and variance of each estimator kind.
    Variance(VarianceArgs),
    /// Cumulative top mass of a pair distribution against |C|/k.
    Concentration(ConcentrationArgs),
    /// Learning curves of exact and sampled training on a synthetic task.
    Train(TrainArgs),
    /// Analytic activation memory of a transformer block.
    Memory(MemoryArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct CommonArgs {
    /// Master seed; required by stochastic commands.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Normalised budget k/m in (0, 1].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip)]
    pub format: Option<Format>,
    /// Built-in preset, e.g. t5-base-like.
    #[arg(long)]
    #[serde(skip)]
    pub preset: Option<String>,
    /// TOML file whose [<command>] table sets defaults.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    /// exact, crs, wta-crs or deterministic.
    #[arg(long, value_parser = parse_kind)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<EstimatorKind>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    /// JSON matrix {"rows", "cols", "data"} for the left operand.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct VarianceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    /// Comma-separated estimator kinds.
    #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<EstimatorKind>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ConcentrationArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionKind>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    /// Budget in pairs; overrides --budget.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskKind>,
    /// Comma-separated methods such as full,wta-crs@0.3,crs@0.1.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<String>>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingArg>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub examples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blobs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separation: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seq_len: Option<usize>,
}

#[derive(Clone, Copy, Debug, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingArg {
    Cached,
    Oracle,
}

impl From<SamplingArg> for SamplingMode {
    fn from(s: SamplingArg) -> Self {
        match s {
            SamplingArg::Cached => SamplingMode::Cached,
            SamplingArg::Oracle => SamplingMode::Oracle,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct MemoryArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seq_len: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_model: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_head: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_head: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_ff: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bytes_per_element: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub compressible_only: bool,
}

fn parse_kind(s: &str) -> Result<EstimatorKind, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

fn flag_map(args: &impl Serialize) -> Result<Map<String, Value>, CliError> {
    match serde_json::to_value(args) {
        Ok(Value::Object(m)) => Ok(m),
        _ => Err(CliError::Config("could not collect flags".into())),
    }
}

/// Resolves the command's settings and renders its output text.
pub fn render(command: &Command) -> Result<(String, Option<PathBuf>), CliError> {
    fn ctx<'a>(c: &'a CommonArgs) -> (Option<&'a str>, Option<&'a std::path::Path>) {
        (c.preset.as_deref(), c.config.as_deref())
    }
    let (text, common) = match command {
        Command::Estimate(a) => {
            let (p, f) = ctx(&a.common);
            let c = resolve("estimate", p, f, flag_map(a)?)?;
            (commands::render_estimate(&c, a.common.format.unwrap_or(Format::Json))?, &a.common)
        }
        Command::Variance(a) => {
            let (p, f) = ctx(&a.common);
            let c = resolve("variance", p, f, flag_map(a)?)?;
            (commands::render_variance(&c, a.common.format.unwrap_or(Format::Csv))?, &a.common)
        }
        Command::Concentration(a) => {
            let (p, f) = ctx(&a.common);
            let c = resolve("concentration", p, f, flag_map(a)?)?;
            (commands::render_concentration(&c, a.common.format.unwrap_or(Format::Csv))?, &a.common)
        }
        Command::Train(a) => {
            let (p, f) = ctx(&a.common);
            let c = resolve("train", p, f, flag_map(a)?)?;
            (commands::render_train(&c, a.common.format.unwrap_or(Format::Csv))?, &a.common)
        }
        Command::Memory(a) => {
            let (p, f) = ctx(&a.common);
            let c = resolve("memory", p, f, flag_map(a)?)?;
            (commands::render_memory(&c, a.common.format.unwrap_or(Format::Json))?, &a.common)
        }
    };
    Ok((text, common.out.clone()))
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let outcome = render(&cli.command).and_then(|(text, out)| match out {
        Some(path) => std::fs::write(&path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(|e| CliError::Runtime(e.to_string())),
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "wtacrs: {e}");
            e.exit_code()
        }
    }
}
