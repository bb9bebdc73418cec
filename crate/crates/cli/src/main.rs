//! `mxladder` — runs MXFP4 enablement-ladder experiments, quantization
//! probes, and rotation micro-benchmarks.
//!
//! Exit codes: 0 = ran to completion (a non-converging run is a result,
//! not an error), 1 = usage/parse error, 2 = runtime failure.

mod artifacts;
mod bench;
mod config;
mod probe;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mxladder_core::block_quant::QuantLayout;
use mxladder_core::hadamard::{HadamardSize, HadamardSpec};
use mxladder_core::trainer::run_ladder;

use config::ExperimentFile;
use probe::{ProbeDist, ProbeSpec};

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or config: exit 1.
    Usage(String),
    /// Execution failure (I/O, internal): exit 2.
    Runtime(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(1),
            CliError::Runtime(_) => ExitCode::from(2),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "mxladder", version, about = "Desk-scale MXFP4 training ladder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a ladder experiment file and write CSV/JSON artifacts.
    Run(RunArgs),
    /// Quantize a synthetic tensor with and without rotation and report
    /// the error statistics.
    QuantProbe(ProbeArgs),
    /// Micro-benchmark dense vs fast Hadamard application.
    BenchHadamard(BenchArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Master seed for init, batching, and stochastic rounding.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Max ladder rows run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long, default_value_t = 64)]
    rows: usize,
    #[arg(long, default_value_t = 256)]
    cols: usize,
    /// Element distribution: gaussian, uniform, or zeros.
    #[arg(long, default_value = "gaussian")]
    dist: String,
    /// Outlier magnitude as a multiple of the block median.
    #[arg(long, default_value_t = 100.0)]
    outlier_mag: f64,
    /// Outliers injected per 32-element row block (0 disables).
    #[arg(long, default_value_t = 0)]
    outliers_per_block: usize,
    /// Quantization layout: row, col, or block.
    #[arg(long, default_value = "row")]
    layout: String,
    /// Rotation: none, det16, det32, or rand16.
    #[arg(long, default_value = "det16")]
    hadamard: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the unrotated quantized tensor (documented byte format).
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 256)]
    rows: usize,
    #[arg(long, default_value_t = 512)]
    cols: usize,
    #[arg(long, default_value_t = 200)]
    iters: usize,
}

fn parse_layout(name: &str) -> Result<QuantLayout, CliError> {
    match name {
        "row" => Ok(QuantLayout::Row1x32),
        "col" => Ok(QuantLayout::Col32x1),
        "block" => Ok(QuantLayout::Block32x32),
        other => Err(CliError::usage(format!(
            "unknown layout `{other}` (expected row, col, or block)"
        ))),
    }
}

fn parse_hadamard(name: &str, seed: u64) -> Result<Option<HadamardSpec>, CliError> {
    match name {
        "none" => Ok(None),
        "det16" => Ok(Some(HadamardSpec::deterministic(HadamardSize::H16))),
        "det32" => Ok(Some(HadamardSpec::deterministic(HadamardSize::H32))),
        "rand16" => Ok(Some(HadamardSpec::randomized(HadamardSize::H16, seed))),
        other => Err(CliError::usage(format!(
            "unknown hadamard `{other}` (expected none, det16, det32, or rand16)"
        ))),
    }
}

fn parse_dist(name: &str) -> Result<ProbeDist, CliError> {
    match name {
        "gaussian" => Ok(ProbeDist::Gaussian),
        "uniform" => Ok(ProbeDist::Uniform),
        "zeros" => Ok(ProbeDist::Zeros),
        other => Err(CliError::usage(format!(
            "unknown distribution `{other}` (expected gaussian, uniform, or zeros)"
        ))),
    }
}

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::runtime(format!("reading {:?}: {e}", args.config)))?;
    let file = ExperimentFile::parse(&text)?;
    let (labels, configs) = file.to_ladder_configs()?;
    let result = run_ladder(&configs, args.seed, args.jobs)
        .map_err(|e| CliError::runtime(format!("ladder: {e}")))?;
    let summary =
        artifacts::write_artifacts(&args.out, &text, args.seed, &labels, &configs, &result)?;
    println!(
        "{}",
        std::fs::read_to_string(args.out.join("table.txt"))
            .map_err(|e| CliError::runtime(format!("re-reading table: {e}")))?
    );
    println!(
        "wrote {} curves, summary.json, table.txt to {:?} (config {})",
        summary.rows.len() + 1,
        args.out,
        &summary.config_hash[..12]
    );
    Ok(())
}

fn cmd_quant_probe(args: &ProbeArgs) -> Result<(), CliError> {
    if !args.cols.is_multiple_of(32) {
        return Err(CliError::usage(format!(
            "cols {} must be a multiple of 32",
            args.cols
        )));
    }
    let spec = ProbeSpec {
        rows: args.rows,
        cols: args.cols,
        dist: parse_dist(&args.dist)?,
        outlier_mag: args.outlier_mag,
        outliers_per_block: args.outliers_per_block,
        layout: parse_layout(&args.layout)?,
        hadamard: parse_hadamard(&args.hadamard, args.seed)?,
        seed: args.seed,
    };
    let (report, tensor) = probe::run_probe(&spec)?;
    print!("{}", probe::render_report(&spec, &report));
    if let Some(path) = &args.dump {
        let q = mxladder_core::block_quant::quantize_tensor(
            &tensor,
            spec.layout,
            &mut mxladder_core::fp4::RoundingMode::NearestEven,
        )
        .map_err(|e| CliError::runtime(format!("quantize for dump: {e}")))?;
        std::fs::write(path, q.to_bytes())
            .map_err(|e| CliError::runtime(format!("writing {path:?}: {e}")))?;
        println!("dumped quantized tensor to {path:?}");
    }
    Ok(())
}

fn cmd_bench_hadamard(args: &BenchArgs) -> Result<(), CliError> {
    if !args.cols.is_multiple_of(32) {
        return Err(CliError::usage(format!(
            "cols {} must be a multiple of 32",
            args.cols
        )));
    }
    let report = bench::run_bench(args.rows, args.cols, args.iters.max(1));
    for warning in bench::soft_warnings(&report) {
        eprintln!("{warning}");
    }
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::runtime(format!("serializing report: {e}")))?;
    println!("{json}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders help/version as "errors"; keep their exit at 0
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::QuantProbe(args) => cmd_quant_probe(args),
        Command::BenchHadamard(args) => cmd_bench_hadamard(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
