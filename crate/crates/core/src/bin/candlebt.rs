//! Command-line front end: run a backtest, compare SNU policies on the same
//! inputs, or verify the decision engine against the brute-force path
//! oracle.
//!
//! Exit codes: 0 ok, 1 configuration error, 2 data error, 3 verification
//! failure. All warnings go to standard error; reports go to files or
//! standard out.

use candlebt_core::io::{
    fingerprint_candles, load_candles, load_script, parse_resolution, write_comparison_json,
    write_report_csv, write_report_json, CandleFileSpec, ColumnMap, CsvFinerSource,
};
use candlebt_core::resolver::{Fallback, FinerDataSource, SnuLogEntry, SnuPolicy};
use candlebt_core::runner::{
    run, run_policy_comparison, BacktestReport, PolicyComparison, RunConfig,
};
use candlebt_core::sweep::{run_sweep, SweepConfig};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(
    name = "candlebt",
    version,
    about = "Candle-chart backtests with explicit ambiguity handling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one backtest and write the report.
    Run(RunArgs),
    /// Run several policies on identical inputs and tabulate divergence.
    Compare(CompareArgs),
    /// Exhaustively check the decision engine against the path oracle.
    Verify(VerifyArgs),
}

#[derive(Args, Clone, Default)]
struct IoArgs {
    /// JSON config file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Candle CSV file.
    #[arg(long)]
    candles: Option<PathBuf>,
    /// Signal script JSON file.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Minimum price increment, e.g. 0.25.
    #[arg(long)]
    tick_size: Option<f64>,
    /// Candle resolution, e.g. 1d, 4h, 15m.
    #[arg(long)]
    resolution: Option<String>,
    /// Flat slippage per fill, in ticks.
    #[arg(long)]
    slippage: Option<i64>,
    /// Flat fees per round trip, in ticks.
    #[arg(long)]
    fees: Option<i64>,
    /// Directory with finer-resolution CSV files (exact policy).
    #[arg(long)]
    finer_dir: Option<PathBuf>,
    /// Comma-separated refinement ladder, coarse to fine, e.g. 1h,1m.
    #[arg(long)]
    ladder: Option<String>,
    /// Fallback when exact refinement still leaves an SNU: wc or bc.
    #[arg(long)]
    fallback: Option<String>,
    /// Maximum exact-refinement depth.
    #[arg(long)]
    max_depth: Option<u32>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: json or csv (csv writes one file per section).
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    col_timestamp: Option<String>,
    #[arg(long)]
    col_open: Option<String>,
    #[arg(long)]
    col_high: Option<String>,
    #[arg(long)]
    col_low: Option<String>,
    #[arg(long)]
    col_close: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    /// SNU policy: wc, bc, ig or ex.
    #[arg(long)]
    policy: Option<String>,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args)]
struct CompareArgs {
    /// Comma-separated policies, e.g. wc,bc,ig.
    #[arg(long)]
    policies: Option<String>,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// Maximum candle range (high - low) to sweep.
    #[arg(long, default_value_t = 6)]
    radius: i64,
    /// Oracle segment budget.
    #[arg(long, default_value_t = candlebt_core::oracle::DEFAULT_MAX_SEGMENTS)]
    max_segments: usize,
    /// Also check outcome-set saturation at max_segments + 1.
    #[arg(long, default_value_t = true)]
    saturation: bool,
}

/// Config-file mirror of the flags; any field may be omitted.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    candles: Option<PathBuf>,
    script: Option<PathBuf>,
    policy: Option<String>,
    policies: Option<Vec<String>>,
    tick_size: Option<f64>,
    resolution: Option<String>,
    slippage: Option<i64>,
    fees: Option<i64>,
    finer_dir: Option<PathBuf>,
    ladder: Option<Vec<String>>,
    fallback: Option<String>,
    max_depth: Option<u32>,
    out: Option<PathBuf>,
    format: Option<String>,
    columns: Option<ColumnsConfig>,
}

#[derive(Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct ColumnsConfig {
    timestamp: Option<String>,
    open: Option<String>,
    high: Option<String>,
    low: Option<String>,
    close: Option<String>,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) => m,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Everything resolved from flags + config file.
struct Settings {
    candles: PathBuf,
    script: PathBuf,
    tick_size: f64,
    resolution: String,
    slippage: i64,
    fees: i64,
    finer_dir: Option<PathBuf>,
    ladder: Vec<String>,
    fallback: Fallback,
    max_depth: u32,
    out: Option<PathBuf>,
    format: String,
    columns: ColumnMap,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let bytes = std::fs::read(path)
        .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| config_err(format!("bad config {}: {e}", path.display())))
}

fn resolve_settings(io: &IoArgs, file: &FileConfig) -> Result<Settings, CliError> {
    let candles = io
        .candles
        .clone()
        .or_else(|| file.candles.clone())
        .ok_or_else(|| config_err("--candles is required"))?;
    let script = io
        .script
        .clone()
        .or_else(|| file.script.clone())
        .ok_or_else(|| config_err("--script is required"))?;
    let tick_size = io
        .tick_size
        .or(file.tick_size)
        .ok_or_else(|| config_err("--tick-size is required"))?;
    if tick_size <= 0.0 || tick_size.is_nan() {
        return Err(config_err(format!(
            "tick size must be positive, got {tick_size}"
        )));
    }
    let resolution = io
        .resolution
        .clone()
        .or_else(|| file.resolution.clone())
        .unwrap_or_else(|| "1d".to_string());
    parse_resolution(&resolution).map_err(|e| config_err(e.to_string()))?;
    let ladder = match (&io.ladder, &file.ladder) {
        (Some(s), _) => s.split(',').map(|x| x.trim().to_string()).collect(),
        (None, Some(v)) => v.clone(),
        (None, None) => Vec::new(),
    };
    let fallback = match io.fallback.as_deref().or(file.fallback.as_deref()) {
        None | Some("wc") => Fallback::WorstCase,
        Some("bc") => Fallback::BestCase,
        Some(other) => return Err(config_err(format!("unknown fallback {other:?}"))),
    };
    let format = io
        .format
        .clone()
        .or_else(|| file.format.clone())
        .unwrap_or_else(|| "json".to_string());
    if format != "json" && format != "csv" {
        return Err(config_err(format!("unknown format {format:?}")));
    }
    let file_cols = file.columns.clone().unwrap_or_default();
    let defaults = ColumnMap::default();
    let columns = ColumnMap {
        timestamp: io
            .col_timestamp
            .clone()
            .or(file_cols.timestamp)
            .unwrap_or(defaults.timestamp),
        open: io
            .col_open
            .clone()
            .or(file_cols.open)
            .unwrap_or(defaults.open),
        high: io
            .col_high
            .clone()
            .or(file_cols.high)
            .unwrap_or(defaults.high),
        low: io.col_low.clone().or(file_cols.low).unwrap_or(defaults.low),
        close: io
            .col_close
            .clone()
            .or(file_cols.close)
            .unwrap_or(defaults.close),
    };
    Ok(Settings {
        candles,
        script,
        tick_size,
        resolution,
        slippage: io.slippage.or(file.slippage).unwrap_or(0),
        fees: io.fees.or(file.fees).unwrap_or(0),
        finer_dir: io.finer_dir.clone().or_else(|| file.finer_dir.clone()),
        ladder,
        fallback,
        max_depth: io
            .max_depth
            .or(file.max_depth)
            .unwrap_or(SnuPolicy::DEFAULT_EXACT_DEPTH),
        out: io.out.clone().or_else(|| file.out.clone()),
        format,
        columns,
    })
}

fn parse_policy(name: &str, settings: &Settings) -> Result<SnuPolicy, CliError> {
    match name {
        "wc" => Ok(SnuPolicy::WorstCase),
        "bc" => Ok(SnuPolicy::BestCase),
        "ig" => Ok(SnuPolicy::Ignore),
        "ex" => {
            // Fail fast: the exact policy is unusable without finer data.
            if settings.finer_dir.is_none() || settings.ladder.is_empty() {
                return Err(config_err("policy ex requires --finer-dir and --ladder"));
            }
            Ok(SnuPolicy::Exact {
                fallback: settings.fallback,
                max_depth: settings.max_depth,
            })
        }
        other => Err(config_err(format!(
            "unknown policy {other:?} (use wc, bc, ig or ex)"
        ))),
    }
}

struct LoadedInputs {
    candles: Vec<candlebt_core::Candle>,
    script: candlebt_core::runner::SignalScript,
    refiner: Option<CsvFinerSource>,
    config: RunConfig,
}

fn load_inputs(settings: &Settings, policy: SnuPolicy) -> Result<LoadedInputs, CliError> {
    let spec = CandleFileSpec {
        path: settings.candles.clone(),
        tick_size: settings.tick_size,
        columns: settings.columns.clone(),
        period_secs: parse_resolution(&settings.resolution).expect("validated"),
        resolution_label: settings.resolution.clone(),
    };
    let candles = load_candles(&spec).map_err(|e| CliError::Data(e.to_string()))?;
    let script = load_script(&settings.script, settings.tick_size)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let refiner = match &settings.finer_dir {
        Some(dir) if !settings.ladder.is_empty() => Some(
            CsvFinerSource::from_dir(dir, settings.tick_size, &settings.ladder, &settings.columns)
                .map_err(|e| CliError::Data(e.to_string()))?,
        ),
        _ => None,
    };
    let mut config = RunConfig::new(policy, settings.tick_size);
    config.slippage_ticks = settings.slippage;
    config.fees_ticks = settings.fees;
    config.data_fingerprint = fingerprint_candles(&candles);
    Ok(LoadedInputs {
        candles,
        script,
        refiner,
        config,
    })
}

fn print_snu_warnings(entries: &[SnuLogEntry]) {
    for e in entries {
        let chosen = match &e.chosen {
            candlebt_core::resolver::Resolution::Outcome { outcome } => outcome.to_string(),
            candlebt_core::resolver::Resolution::Cancelled => "order ignored".to_string(),
        };
        eprintln!(
            "WARNING: SNU {} at {} resolved as {} (policy {})",
            e.snu_id, e.candle_time, chosen, e.policy
        );
    }
}

fn print_summary(report: &BacktestReport) {
    let s = &report.summary;
    eprintln!("--- summary ({} policy) ---", report.config.policy);
    eprintln!("trades           {}", s.trade_count);
    eprintln!("win rate         {:.3}", s.win_rate);
    eprintln!("gross total      {} ticks", s.gross_total_ticks);
    eprintln!("net total        {} ticks", s.net_total_ticks);
    let pf = match s.profit_factor {
        candlebt_core::runner::ProfitFactor::Undefined => "undefined".to_string(),
        candlebt_core::runner::ProfitFactor::Infinite => "inf".to_string(),
        candlebt_core::runner::ProfitFactor::Value(v) => format!("{v:.3}"),
    };
    eprintln!("profit factor    {pf}");
    eprintln!("average trade    {:.3} ticks", s.average_trade_ticks);
    eprintln!("max drawdown     {} ticks", s.max_drawdown_ticks);
    eprintln!("SNUs encountered {}", report.snu_log.len());
    for w in &report.warnings {
        eprintln!("note: {w}");
    }
}

fn write_output(settings: &Settings, report: &BacktestReport) -> Result<(), CliError> {
    if settings.format == "csv" {
        let out = settings
            .out
            .as_ref()
            .ok_or_else(|| config_err("--out is required for csv format"))?;
        let sections = write_report_csv(report);
        let stem = out.to_string_lossy();
        let stem = stem.strip_suffix(".csv").unwrap_or(&stem);
        for (suffix, bytes) in [
            ("trades", &sections.trades),
            ("snu_log", &sections.snu_log),
            ("summary", &sections.summary),
        ] {
            let path = PathBuf::from(format!("{stem}.{suffix}.csv"));
            std::fs::write(&path, bytes)
                .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
        }
        return Ok(());
    }
    let bytes = write_report_json(report);
    match &settings.out {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes).ok();
        }
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let file = load_file_config(args.io.config.as_deref())?;
    let settings = resolve_settings(&args.io, &file)?;
    let policy_name = args
        .policy
        .clone()
        .or_else(|| file.policy.clone())
        .ok_or_else(|| config_err("--policy is required"))?;
    let policy = parse_policy(&policy_name, &settings)?;
    let inputs = load_inputs(&settings, policy)?;
    let refiner = inputs.refiner.as_ref().map(|r| r as &dyn FinerDataSource);
    let report = run(&inputs.candles, &inputs.script, &inputs.config, refiner)
        .map_err(|e| CliError::Data(e.to_string()))?;
    print_snu_warnings(&report.snu_log);
    print_summary(&report);
    write_output(&settings, &report)
}

fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    let file = load_file_config(args.io.config.as_deref())?;
    let settings = resolve_settings(&args.io, &file)?;
    let names: Vec<String> = match (&args.policies, &file.policies) {
        (Some(s), _) => s.split(',').map(|x| x.trim().to_string()).collect(),
        (None, Some(v)) => v.clone(),
        (None, None) => return Err(config_err("--policies is required")),
    };
    if names.is_empty() {
        return Err(config_err("--policies needs at least one policy"));
    }
    let policies: Vec<SnuPolicy> = names
        .iter()
        .map(|n| parse_policy(n, &settings))
        .collect::<Result<_, _>>()?;
    let inputs = load_inputs(&settings, policies[0])?;
    let refiner = inputs.refiner.as_ref().map(|r| r as &dyn FinerDataSource);
    let comparison = run_policy_comparison(
        &inputs.candles,
        &inputs.script,
        &policies,
        &inputs.config,
        refiner,
    )
    .map_err(|e| CliError::Data(e.to_string()))?;
    print_divergence(&comparison);
    for report in &comparison.reports {
        print_snu_warnings(&report.snu_log);
    }
    let bytes = write_comparison_json(&comparison);
    match &settings.out {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes).ok();
        }
    }
    Ok(())
}

fn print_divergence(comparison: &PolicyComparison) {
    eprintln!("--- policy divergence ---");
    eprintln!("policy   trades  net_ticks  snus");
    for (i, name) in comparison.policies.iter().enumerate() {
        eprintln!(
            "{:<8} {:>6}  {:>9}  {:>4}",
            name,
            comparison.divergence.trade_counts[i],
            comparison.divergence.net_totals[i],
            comparison.reports[i].snu_log.len()
        );
    }
    if let Some(band) = comparison.divergence.band_width_ticks {
        eprintln!("equity band (bc - wc): {band} ticks");
    }
    for row in &comparison.divergence.per_candle_snu {
        eprintln!("SNU counts at {}: {:?}", row.timestamp, row.counts);
    }
}

fn cmd_verify(args: &VerifyArgs) -> u8 {
    let cfg = SweepConfig {
        radius: args.radius,
        max_segments: args.max_segments,
        check_saturation: args.saturation,
        check_policies: true,
        max_reports: 20,
    };
    let report = run_sweep(&cfg);
    println!(
        "verified {} cases in {:.1}s (radius {}, {} segments)",
        report.cases,
        report.elapsed.as_secs_f64(),
        args.radius,
        args.max_segments
    );
    println!(
        "{:<32} {:>9} {:>9} {:>9}",
        "family", "cases", "unique", "snu"
    );
    for (family, c) in &report.families {
        println!(
            "{:<32} {:>9} {:>9} {:>9}",
            family, c.cases, c.unique, c.ambiguous
        );
    }
    if report.clean() {
        println!("engine matches oracle on all cases");
        0
    } else {
        eprintln!(
            "VERIFICATION FAILED: {} discrepancies, {} mirror, {} saturation, {} policy-bound",
            report.discrepancy_count,
            report.mirror_mismatches,
            report.saturation_mismatches,
            report.policy_violations
        );
        for d in &report.discrepancies {
            eprintln!("{d}\n");
        }
        EXIT_VERIFY
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Verify(args) => return ExitCode::from(cmd_verify(args)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
