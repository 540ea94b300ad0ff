//! `crosslayer run | sweep | validate`.
//!
//! Exit codes: 0 ok, 1 I/O or simulation failure, 2 invalid config or
//! unknown preset.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use crosslayer::sim::metrics::metrics_csv;
use crosslayer::sim::sweep::{sweep_csv_line, SWEEP_CSV_HEADER};
use crosslayer::sim::{run_full, run_sweep, SimConfig, SweepKind};
use crosslayer::Error;
use log::{info, LevelFilter};

#[derive(Parser)]
#[command(name = "crosslayer", version, about = "Cross-layer LTE video delivery simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario: a TOML file or a built-in preset name.
    Run {
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Sweep clients, dl_rbs or guard_time over seeds 1..=N.
    Sweep {
        preset: String,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Parse and validate a config without running it.
    Validate { config: String },
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum LogMode {
    Off,
    Summary,
    Trace,
}

fn log_mode() -> Result<LogMode, String> {
    match std::env::var("CROSSLAYER_LOG").as_deref() {
        Err(_) | Ok("summary") => Ok(LogMode::Summary),
        Ok("off") => Ok(LogMode::Off),
        Ok("trace") => Ok(LogMode::Trace),
        Ok(other) => Err(format!("CROSSLAYER_LOG must be off, summary or trace (got `{other}`)")),
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config { .. } | Error::InvalidInput(_) | Error::Parse { .. } | Error::Validation { .. } => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

/// A path to a TOML file, else a preset name. Returns the directory that
/// relative trace paths resolve against.
fn load_config(arg: &str) -> Result<(SimConfig, Option<PathBuf>), Failure> {
    let path = Path::new(arg);
    if path.is_file() {
        let cfg = SimConfig::load(path)?;
        let base = path.parent().map(Path::to_path_buf);
        return Ok((cfg, base));
    }
    if arg.ends_with(".toml") {
        return Err(Failure {
            code: 2,
            message: format!("{arg}: no such config file"),
        });
    }
    Ok((SimConfig::preset(arg)?, None))
}

/// Write through a temporary sibling so readers never see a partial file.
fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(tmp, path)
}

fn run(config: &str, seed: Option<u64>, out: &Path, mode: LogMode) -> Result<(), Failure> {
    let (mut cfg, base) = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    info!("{} ({}), config hash {}", cfg.name, cfg.combo_label(), cfg.hash());
    let output = run_full(&cfg, base.as_deref(), mode == LogMode::Trace)?;
    fs::create_dir_all(out)?;
    let json = serde_json::to_string_pretty(&output.report).expect("report serializes");
    write_atomic(&out.join("report.json"), &json)?;
    write_atomic(&out.join("metrics.csv"), &metrics_csv(&output.metrics))?;
    write_atomic(&out.join("tcp_trace.csv"), &output.report.tcp_trace_csv())?;
    if mode == LogMode::Trace {
        let mut log = output.allocations.join("\n");
        log.push('\n');
        write_atomic(&out.join("allocations.log"), &log)?;
    }
    if mode != LogMode::Off {
        for c in &output.report.clients {
            info!(
                "client {} {}: {:.1} kbps, rebuffer {:.3} s, QR {:.4}, {} APD drops, {} timeouts",
                c.client, c.sequence, c.throughput_kbps, c.rebuffer_s, c.quality_retention, c.apd_dropped_packets, c.timeouts
            );
        }
    }
    println!("{}", output.report.summary_line());
    Ok(())
}

fn sweep(preset: &str, seeds: u64, out: &Path) -> Result<(), Failure> {
    let kind: SweepKind = preset.parse()?;
    if seeds == 0 {
        return Err(Failure {
            code: 2,
            message: "--seeds must be at least 1".into(),
        });
    }
    fs::create_dir_all(out)?;
    let path = out.join("sweep.csv");
    let mut csv = format!("{SWEEP_CSV_HEADER}\n");
    let mut io_error = None;
    let mut last_point = None;
    let rows = run_sweep(kind, seeds, |row| {
        info!(
            "{}={} {}_{}{} seed {}: {:.1} kbps",
            kind.name(),
            row.point,
            row.ul_sched,
            row.dl_sched,
            if row.apd { " apd" } else { "" },
            row.seed,
            row.system_kbps
        );
        // Rewrite the file whenever a point completes.
        if last_point.is_some_and(|p| p != row.point) && io_error.is_none() {
            io_error = write_atomic(&path, &csv).err();
        }
        last_point = Some(row.point);
        csv.push_str(&sweep_csv_line(row));
        csv.push('\n');
    })?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    write_atomic(&path, &csv)?;
    println!("{} rows written to {}", rows.len(), path.display());
    Ok(())
}

fn validate(config: &str) -> Result<(), Failure> {
    let (cfg, _) = load_config(config)?;
    println!("{}: ok ({}, {} clients, hash {})", config, cfg.combo_label(), cfg.clients, cfg.hash());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mode = match log_mode() {
        Ok(m) => m,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let level = match mode {
        LogMode::Off => LevelFilter::Off,
        LogMode::Summary => LevelFilter::Info,
        LogMode::Trace => LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    let result = match &cli.command {
        Command::Run { config, seed, out } => run(config, *seed, out, mode),
        Command::Sweep { preset, seeds, out } => sweep(preset, *seeds, out),
        Command::Validate { config } => validate(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let _ = writeln!(std::io::stderr(), "error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
