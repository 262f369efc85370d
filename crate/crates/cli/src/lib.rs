//! `grng` command-line front-end: generate samples, run the normality
//! battery, build histograms, benchmark, and emit quadrature pairs.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data and I/O errors.

pub mod generate;
pub mod io;
pub mod report;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use grng_core::fp_pipeline::{graph_inventory, CoreKind};
use grng_core::qkdmod::{self, quadrature_stream, ModulationConfig};
use grng_core::stats::{self, StatsError, TestKind, TestReport, DEFAULT_ALPHA};
use grng_core::transforms::{Algorithm, Transform};
use serde::Serialize;
use thiserror::Error;

pub use generate::{generate, Generated, Mode, RunConfig, Samples, DEFAULT_SEED};
pub use io::{Format, Metadata};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Stats(StatsError::InvalidBins | StatsError::InvalidAlpha(_)) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "grng",
    version,
    about = "LFSR-driven Gaussian random number generator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate samples to a file, with a `.meta.json` sidecar.
    Gen(GenArgs),
    /// Run the chi-square / Anderson-Darling / Kolmogorov-Smirnov battery.
    Test(TestArgs),
    /// Equal-width histogram as CSV (bin_lo,bin_hi,count).
    Hist(HistArgs),
    /// Throughput and core-usage comparison across algorithms and modes.
    Bench(BenchArgs),
    /// Gaussian-modulated quadrature pairs (q, p) with variance V.
    Quadrature(QuadratureArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoArg {
    #[value(name = "box-muller")]
    BoxMuller,
    Polar,
    Clt,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::BoxMuller => Algorithm::BoxMuller,
            AlgoArg::Polar => Algorithm::Polar,
            AlgoArg::Clt => Algorithm::CentralLimit,
        }
    }
}

/// Accepts plain integers and integral scientific notation such as `1e6`.
fn parse_count(s: &str) -> Result<usize, String> {
    if let Ok(n) = s.parse::<usize>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 2f64.powi(53) => Ok(x as usize),
        _ => Err(format!("expected a non-negative integer, got {s:?}")),
    }
}

/// Decimal or `0x`-prefixed hexadecimal.
fn parse_seed(s: &str) -> Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("invalid seed {s:?}: {e}"))
}

#[derive(Debug, Clone, Args)]
pub struct GenerationArgs {
    #[arg(long, value_enum, default_value = "box-muller")]
    pub algo: AlgoArg,
    #[arg(long, value_parser = parse_count, default_value = "1000000")]
    pub n: usize,
    /// Master seed; every LFSR seed is derived from it.
    #[arg(long, env = "GRNG_SEED", value_parser = parse_seed, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "reference")]
    pub mode: Mode,
    /// Uniforms per central-limit sample.
    #[arg(long, default_value_t = grng_core::CltConfig::DEFAULT_K)]
    pub k: usize,
    /// Independent generator shards, concatenated in shard order.
    #[arg(long, default_value_t = 1)]
    pub shards: usize,
}

impl GenerationArgs {
    pub fn config(&self) -> RunConfig {
        RunConfig {
            algorithm: self.algo.into(),
            n: self.n,
            master_seed: self.seed,
            mode: self.mode,
            k: self.k,
            shards: self.shards,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub generation: GenerationArgs,
    /// Defaults to the output file's extension, then csv.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    /// Sample file (csv, json or bin; detected from contents).
    pub input: PathBuf,
    /// Comma-separated subset of chi2, ad, ks.
    #[arg(long, default_value = "chi2,ad,ks")]
    pub suite: String,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Chi-square bins.
    #[arg(long, default_value_t = stats::DEFAULT_CHI2_BINS)]
    pub bins: usize,
    #[arg(long, value_enum, default_value = "table")]
    pub format: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct HistArgs {
    pub input: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Benchmark one algorithm; all three by default.
    #[arg(long, value_enum)]
    pub algo: Option<AlgoArg>,
    /// Benchmark one mode; both by default.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, value_parser = parse_count, default_value = "1000000")]
    pub n: usize,
    #[arg(long, env = "GRNG_SEED", value_parser = parse_seed, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = grng_core::CltConfig::DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = 1)]
    pub shards: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PairFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct QuadratureArgs {
    #[command(flatten)]
    pub generation: GenerationArgs,
    /// Modulation variance V in shot-noise units; `--n` counts pairs.
    #[arg(long, default_value_t = 1.0)]
    pub variance: f64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: PairFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(args) => cmd_gen(&args, stdout),
        Command::Test(args) => cmd_test(&args, stdout),
        Command::Hist(args) => cmd_hist(&args, stdout),
        Command::Bench(args) => cmd_bench(&args, stdout),
        Command::Quadrature(args) => cmd_quadrature(&args, stdout),
    }
}

fn emit(out: Option<&Path>, stdout: &mut dyn Write, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => io::write_file(path, text.as_bytes()),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| io::io_error(Path::new("<stdout>"), e)),
    }
}

/// Writes the samples and their sidecar; returns the sidecar contents.
pub fn write_generated(
    config: &RunConfig,
    generated: &Generated,
    format: Format,
    out: &Path,
) -> Result<Metadata, CliError> {
    io::write_file(out, &io::encode(&generated.samples, format)?)?;
    let meta = Metadata::new(config, generated, format);
    io::write_json(&io::sidecar_path(out), &meta)?;
    Ok(meta)
}

pub fn cmd_gen(args: &GenArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let config = args.generation.config();
    let format = args.format.unwrap_or_else(|| Format::from_path(&args.out));
    let generated = generate(&config)?;
    let meta = write_generated(&config, &generated, format, &args.out)?;
    let line = format!(
        "wrote {} {} samples ({}) to {}; {} uniforms consumed\n",
        meta.n,
        meta.algorithm,
        meta.mode.id(),
        args.out.display(),
        meta.uniforms_consumed,
    );
    emit(None, stdout, &line)
}

pub fn parse_suite(suite: &str) -> Result<Vec<TestKind>, CliError> {
    let mut kinds = Vec::new();
    for id in suite.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let kind = TestKind::from_id(id).ok_or_else(|| {
            CliError::Usage(format!("unknown test {id:?}; expected chi2, ad or ks"))
        })?;
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    if kinds.is_empty() {
        return Err(CliError::Usage("--suite names no tests".into()));
    }
    Ok(kinds)
}

/// Runs the requested tests over a sample buffer.
pub fn run_suite(
    samples: &[f64],
    suite: &[TestKind],
    alpha: f64,
    bins: usize,
) -> Result<Vec<TestReport>, CliError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Usage(format!(
            "--alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if bins < 2 {
        return Err(CliError::Usage(format!(
            "--bins must be at least 2, got {bins}"
        )));
    }
    suite
        .iter()
        .map(|&kind| match kind {
            TestKind::ChiSquare => stats::chi_square_gof_binned(samples, bins, alpha),
            other => stats::run_test(other, samples, alpha),
        })
        .collect::<Result<_, _>>()
        .map_err(CliError::from)
}

pub fn cmd_test(args: &TestArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let suite = parse_suite(&args.suite)?;
    let samples = io::read_samples(&args.input, None)?.to_f64();
    let reports = run_suite(&samples, &suite, args.alpha, args.bins)?;
    let text = match args.format {
        ReportFormat::Table => {
            report::test_table(&args.input.display().to_string(), samples.len(), &reports)
        }
        ReportFormat::Json => {
            serde_json::to_string_pretty(&reports).map_err(|e| CliError::Data(e.to_string()))?
                + "\n"
        }
    };
    emit(args.out.as_deref(), stdout, &text)
}

pub fn cmd_hist(args: &HistArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if args.bins == 0 {
        return Err(CliError::Usage("--bins must be at least 1".into()));
    }
    let samples = io::read_samples(&args.input, None)?.to_f64();
    let histogram = stats::build_histogram(&samples, args.bins, None)?;
    emit(args.out.as_deref(), stdout, &histogram.to_csv())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub algorithm: Algorithm,
    pub mode: Mode,
    pub n: usize,
    pub seconds: f64,
    pub uniforms_per_sample: f64,
    /// Pipeline mode: core invocations per emitted sample.
    pub cores_per_sample: Option<BTreeMap<CoreKind, f64>>,
}

impl BenchRow {
    pub fn samples_per_second(&self) -> f64 {
        self.n as f64 / self.seconds
    }
}

pub fn bench(config: &RunConfig) -> Result<BenchRow, CliError> {
    let start = Instant::now();
    let generated = generate(config)?;
    let seconds = start.elapsed().as_secs_f64().max(1e-9);
    let n = generated.samples.len();
    Ok(BenchRow {
        algorithm: config.algorithm,
        mode: config.mode,
        n,
        seconds,
        uniforms_per_sample: generated.uniforms_consumed as f64 / n as f64,
        cores_per_sample: generated.core_invocations.map(|counts| {
            counts
                .into_iter()
                .map(|(core, c)| (core, c as f64 / n as f64))
                .collect()
        }),
    })
}

pub fn cmd_bench(args: &BenchArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let algorithms: Vec<Algorithm> = match args.algo {
        Some(a) => vec![a.into()],
        None => Algorithm::ALL.to_vec(),
    };
    let modes = match args.mode {
        Some(m) => vec![m],
        None => vec![Mode::Reference, Mode::Pipeline],
    };
    let mut rows = Vec::new();
    for &algorithm in &algorithms {
        for &mode in &modes {
            let config = RunConfig {
                algorithm,
                n: args.n,
                master_seed: args.seed,
                mode,
                k: args.k,
                shards: args.shards,
            };
            rows.push(bench(&config)?);
        }
    }
    let throughput: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.algorithm.to_string(),
                r.mode.id().to_string(),
                r.n.to_string(),
                format!("{:.3}", r.seconds),
                format!("{:.3e}", r.samples_per_second()),
                format!("{:.4}", r.uniforms_per_sample),
            ]
        })
        .collect();
    let mut text = report::render_table(
        &[
            "Algorithm",
            "Mode",
            "Samples",
            "Seconds",
            "Samples/s",
            "Uniforms/sample",
        ],
        &throughput,
    );

    let mut cores = Vec::new();
    for &algorithm in &algorithms {
        let transform =
            Transform::new(algorithm, args.k).map_err(|e| CliError::Usage(e.to_string()))?;
        let per_sample = rows
            .iter()
            .find(|r| r.algorithm == algorithm && r.cores_per_sample.is_some())
            .and_then(|r| r.cores_per_sample.as_ref());
        for (core, instances) in graph_inventory(&transform) {
            cores.push(vec![
                algorithm.to_string(),
                core.label().to_string(),
                instances.to_string(),
                per_sample
                    .and_then(|m| m.get(&core))
                    .map_or("-".to_string(), |c| format!("{c:.4}")),
            ]);
        }
    }
    text.push('\n');
    text.push_str(&report::render_table(
        &["Algorithm", "Core", "Instances", "Invocations/sample"],
        &cores,
    ));
    emit(None, stdout, &text)
}

pub fn cmd_quadrature(args: &QuadratureArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let modulation = ModulationConfig::new(args.variance, args.generation.n)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut config = args.generation.config();
    config.n = args
        .generation
        .n
        .checked_mul(2)
        .ok_or_else(|| CliError::Usage("--n too large".into()))?;
    let normals = generate(&config)?.samples.to_f64();
    let pairs =
        quadrature_stream(normals, &modulation).map_err(|e| CliError::Data(e.to_string()))?;
    let text = match args.format {
        PairFormat::Csv => qkdmod::to_csv(&pairs),
        PairFormat::Json => {
            serde_json::to_string(&pairs).map_err(|e| CliError::Data(e.to_string()))? + "\n"
        }
    };
    emit(args.out.as_deref(), stdout, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_parsing() {
        assert_eq!(parse_count("1000"), Ok(1000));
        assert_eq!(parse_count("1e6"), Ok(1_000_000));
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
    }

    #[test]
    fn seed_parsing() {
        assert_eq!(parse_seed("42"), Ok(42));
        assert_eq!(parse_seed("0xff"), Ok(255));
        assert!(parse_seed("zz").is_err());
    }

    #[test]
    fn suite_parsing() {
        assert_eq!(
            parse_suite("ks, chi2,ks").unwrap(),
            vec![TestKind::KolmogorovSmirnov, TestKind::ChiSquare]
        );
        assert!(matches!(parse_suite(""), Err(CliError::Usage(_))));
        assert!(matches!(parse_suite("t"), Err(CliError::Usage(_))));
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
        assert_eq!(CliError::Data("x".into()).exit_code(), 2);
        assert_eq!(CliError::Stats(StatsError::EmptySample).exit_code(), 2);
    }
}
