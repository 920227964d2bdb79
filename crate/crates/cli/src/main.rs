use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dissent::runner::{load_config, paper_suite, render_report, report_from_traces, run_experiment, ExperimentConfig, ReportFormat};

/// Seeded simulator of disagreement in multi-agent teams.
#[derive(Parser)]
#[command(name = "dissent", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario of a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `base_seed` from the file.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `output_dir` from the file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = one per core).
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Rebuild a report from trace files.
    Report {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Check a configuration file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the built-in preset covering the study's sweeps.
    PaperSuite {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        parallel: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Table => ReportFormat::Table,
            Format::Json => ReportFormat::Json,
        }
    }
}

const INVALID: u8 = 1;
const SCENARIO_FAILED: u8 = 2;

fn read_config(path: &Path) -> Result<ExperimentConfig, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    load_config(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn execute(mut config: ExperimentConfig, seed: Option<u64>, out: Option<PathBuf>, parallel: Option<usize>) -> ExitCode {
    if let Some(seed) = seed {
        config.base_seed = seed;
    }
    if let Some(p) = parallel {
        config.parallelism = p;
    }
    let out = out.unwrap_or_else(|| config.output_dir.clone());
    match run_experiment(&config, &out) {
        Ok(report) => {
            print!("{}", render_report(&report, ReportFormat::Table));
            let failed = report.failures().count();
            if failed > 0 {
                eprintln!("{failed} scenario(s) failed");
                ExitCode::from(SCENARIO_FAILED)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(INVALID)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run { config, seed, out, parallel } => match read_config(&config) {
            Ok(c) => execute(c, seed, out, parallel),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(INVALID)
            }
        },
        Command::PaperSuite { out, seed, parallel } => execute(paper_suite(), seed, Some(out), parallel),
        Command::Validate { config } => match read_config(&config) {
            Ok(c) => {
                println!("ok: {} scenario(s)", c.scenarios.len());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(INVALID)
            }
        },
        Command::Report { traces, format } => match report_from_traces(&traces) {
            Ok(r) if r.scenarios.is_empty() => {
                eprintln!("error: no trace files in {}", traces.display());
                ExitCode::from(INVALID)
            }
            Ok(r) => {
                print!("{}", render_report(&r, format.into()));
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(INVALID)
            }
        },
    }
}
