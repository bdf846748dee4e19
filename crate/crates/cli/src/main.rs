use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mogp_core::experiment::{self, default_jobs, ExecutionSummary, ExperimentConfig, SweepGrid};
use mogp_core::stats::{mean, std_dev};

/// Multi-objective GP experiments on imbalanced binary classification.
#[derive(Parser)]
#[command(name = "mogp", version)]
struct Cli {
    /// Concurrent runs (defaults to the number of CPUs).
    #[arg(short, long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) one experiment cell from a TOML config.
    Run { config: PathBuf },
    /// Expand a grid file into cells, write a manifest and run them all.
    Sweep { grid: PathBuf },
    /// Summarise a campaign manifest into CSV/JSON tables.
    Report {
        manifest: PathBuf,
        /// Output directory (default: report/ next to the manifest).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn finish(summary: &ExecutionSummary) -> ExitCode {
    eprintln!(
        "{} runs executed, {} already complete, {} failed",
        summary.executed,
        summary.skipped,
        summary.failures.len()
    );
    for f in &summary.failures {
        eprintln!("  {f}");
    }
    if summary.all_completed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let jobs = cli.jobs.unwrap_or_else(default_jobs);
    let result = match cli.command {
        Command::Run { config } => ExperimentConfig::load(&config).and_then(|cfg| {
            let out = experiment::run_experiment(&cfg, jobs)?;
            let hv: Vec<f64> = out.results.iter().map(|r| r.hv).collect();
            if !hv.is_empty() {
                println!(
                    "{}: mean HV {:.4} ± {:.4} over {} runs",
                    cfg.label(),
                    mean(&hv),
                    std_dev(&hv),
                    hv.len()
                );
            }
            println!("results in {}", cfg.output_dir.display());
            Ok(finish(&out.summary))
        }),
        Command::Sweep { grid } => SweepGrid::load(&grid).and_then(|g| {
            let out = experiment::sweep(&g, jobs)?;
            println!(
                "{} cells; manifest {}",
                out.manifest.cells.len(),
                out.manifest_path.display()
            );
            Ok(finish(&out.summary))
        }),
        Command::Report { manifest, out } => experiment::report(&manifest, out.as_deref()).map(|r| {
            if r.partial {
                eprintln!("partial report, {} missing item(s):", r.missing.len());
                for m in &r.missing {
                    eprintln!("  {m}");
                }
            }
            println!(
                "{} cells summarised, {} comparisons",
                r.summary.len(),
                r.comparisons.len()
            );
            ExitCode::SUCCESS
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}
