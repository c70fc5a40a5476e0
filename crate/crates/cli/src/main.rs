use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use powerlimits::experiments::{run, ExperimentConfig, ExperimentKind, ExperimentReport, OutputFormat};

#[derive(Parser)]
#[command(
    name = "powerlimits",
    version,
    about = "Limit laws of powers of random compact Lie group elements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config sample size.
        #[arg(long)]
        samples: Option<usize>,
        /// Report destination; stdout when neither this nor the config names one.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// List the experiment kinds.
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::List => {
            let mut out = std::io::stdout().lock();
            for kind in ExperimentKind::ALL {
                writeln!(out, "{:<20} {}", kind.name(), kind.description())?;
            }
            Ok(true)
        }
        Command::Run {
            config,
            seed,
            samples,
            out,
            format,
        } => {
            let mut cfg = ExperimentConfig::read(&config).with_context(|| format!("reading {}", config.display()))?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(samples) = samples {
                cfg.samples = samples;
            }
            if let Some(out) = out {
                cfg.output = Some(out);
            }
            if let Some(format) = format {
                cfg.format = format.into();
            }
            cfg.validate()?;
            let report = run(&cfg)?;
            emit(&report, &cfg)?;
            summarize(&report);
            Ok(report.pass)
        }
    }
}

fn emit(report: &ExperimentReport, cfg: &ExperimentConfig) -> anyhow::Result<()> {
    match &cfg.output {
        Some(path) => report
            .write(path, cfg.format)
            .with_context(|| format!("writing {}", path.display())),
        None => Ok(report.write_to(std::io::stdout().lock(), cfg.format)?),
    }
}

fn summarize(report: &ExperimentReport) {
    let rows: usize = report.tables.iter().map(|t| t.rows.len()).sum();
    let failed = report.failures().count();
    eprintln!(
        "{}: {} ({} rows, {} failed, {:.2}s)",
        report.experiment,
        if report.pass { "PASS" } else { "FAIL" },
        rows,
        failed,
        report.wall_clock_seconds
    );
    for (m, row) in report.failures().take(10) {
        eprintln!("  m={m} {} z={:.3}", row.statistic_id, row.z);
    }
}
