use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use safebo_cli::experiment::ExperimentError;
use safebo_cli::{export_trace, load_run, load_runs, parse_config, run_experiment, summarize};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "safebo", version, about = "Safe Bayesian optimization of barrier-filtered controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every repetition of an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's `out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        repeats: Option<usize>,
        /// Base seed; repetition i uses seed + i.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize the run records of one or more output directories.
    Summarize {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// JSON report path; percentile traces go next to it as CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-simulate one evaluation of a run record and write its trajectory.
    Trace {
        record: PathBuf,
        #[arg(long)]
        entry: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    error!("{msg}");
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run { config, out, repeats, seed } => {
            let mut cfg = match parse_config(&config) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            if let Some(r) = repeats {
                cfg.repeats = r;
            }
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            let dir = out
                .or_else(|| cfg.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from(format!("results/{}_{}", cfg.task, cfg.algorithm.as_str())));
            match run_experiment(&cfg, &dir) {
                Ok(manifest) => {
                    let ok = manifest.runs.iter().filter(|r| r.file.is_some()).count();
                    println!("{ok}/{} repetitions written to {}", manifest.runs.len(), dir.display());
                    ExitCode::from(manifest.exit_code() as u8)
                }
                Err(ExperimentError::Config(e)) => fail(EXIT_CONFIG, e),
                Err(e) => fail(EXIT_RUNTIME, e),
            }
        }
        Command::Summarize { dirs, out } => {
            let mut runs = Vec::new();
            for d in &dirs {
                match load_runs(d) {
                    Ok(r) => runs.extend(r),
                    Err(e) => return fail(EXIT_RUNTIME, e),
                }
            }
            let report = match summarize(&runs) {
                Ok(r) => r,
                Err(e) => return fail(EXIT_RUNTIME, e),
            };
            if let Err(e) = report.save(&out) {
                return fail(EXIT_RUNTIME, e);
            }
            for a in &report.algorithms {
                println!(
                    "{:>5}: runs {:>3}  median final {:>12}  feasibility init {:>6}  suggest {:>6}",
                    a.algorithm.as_str(),
                    a.runs,
                    fmt(a.median_final, 4),
                    fmt(a.median_init_feasibility, 3),
                    fmt(a.median_suggest_feasibility, 3),
                );
            }
            for t in &report.tests {
                println!("{} vs {}: U = {}, p = {:.4}", t.a.as_str(), t.b.as_str(), t.u, t.p);
            }
            ExitCode::SUCCESS
        }
        Command::Trace { record, entry, out } => {
            let run = match load_run(&record) {
                Ok(r) => r,
                Err(e) => return fail(EXIT_RUNTIME, e),
            };
            match export_trace(&run, entry, &out) {
                Ok(trace) => {
                    println!("{} samples written to {}", trace.len(), out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(EXIT_RUNTIME, e),
            }
        }
    }
}

fn fmt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}
