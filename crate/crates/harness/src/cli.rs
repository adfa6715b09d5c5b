//! The `usersim` command line.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use usersim_core::{Baseline, Dataset, Task};

use crate::corpus::{self, DataDir};
use crate::manifest;
use crate::runner::{self, RunOptions};

#[derive(Debug, Parser)]
#[command(
    name = "usersim",
    version,
    about = "Evaluate LLM user simulators for conversational recommendation"
)]
pub struct Cli {
    /// More logging (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Preprocess a raw dataset into the data directory.
    Ingest {
        #[arg(value_parser = parse_dataset)]
        dataset: Dataset,
        path: PathBuf,
        #[arg(long, default_value = "data")]
        data: PathBuf,
        /// Seed for the Reddit head-comment draw.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run one task (or all) and write a run directory.
    Run {
        /// t1..t5, or `all`.
        #[arg(long, value_parser = parse_tasks)]
        task: TaskSelection,
        /// vanilla, di, di-pp or ih; every supported baseline when omitted.
        #[arg(long, value_parser = parse_baseline)]
        baseline: Option<Baseline>,
        /// Backend and provider configuration (TOML).
        #[arg(long)]
        backend: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Feedback task: also show the full recommendation text.
        #[arg(long)]
        explanations: bool,
        /// Feedback task: ask for a reason with each answer.
        #[arg(long)]
        reasons: bool,
        #[arg(long, default_value = "data")]
        data: PathBuf,
        /// Run directory; defaults to `runs/<task>_<baseline>_seed<N>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render tables and charts from a run directory's reports.
    Report { run_dir: PathBuf },
    /// Re-check the hashes in a run directory's manifest.
    Verify { run_dir: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSelection(pub Vec<Task>);

fn parse_tasks(s: &str) -> Result<TaskSelection, String> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(TaskSelection(Task::ALL.to_vec()));
    }
    Task::parse(s)
        .map(|t| TaskSelection(vec![t]))
        .ok_or_else(|| format!("unknown task `{s}` (expected t1..t5 or all)"))
}

fn parse_baseline(s: &str) -> Result<Baseline, String> {
    Baseline::parse(s).ok_or_else(|| format!("unknown baseline `{s}` (expected vanilla, di, di-pp or ih)"))
}

fn parse_dataset(s: &str) -> Result<Dataset, String> {
    Dataset::parse(s).ok_or_else(|| format!("unknown dataset `{s}` (expected redial, reddit, movielens or imdb)"))
}

/// Parses `args` and runs the command, returning the process exit code:
/// 0 on success, 1 on a hard error, 2 on a usage error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Ingest {
            dataset,
            path,
            data,
            seed,
        } => {
            std::fs::create_dir_all(&data)?;
            let s = corpus::ingest(dataset, &path, &DataDir::new(&data), seed)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
        }
        Command::Run {
            task,
            baseline,
            backend,
            seed,
            explanations,
            reasons,
            data,
            out,
        } => {
            let out = out.unwrap_or_else(|| {
                let t = if task.0.len() == 1 { task.0[0].id() } else { "all" };
                let b = baseline.map(|b| b.id()).unwrap_or("all");
                PathBuf::from("runs").join(format!("{t}_{b}_seed{seed}"))
            });
            let opts = RunOptions {
                tasks: task.0,
                baseline,
                config: backend,
                seed,
                explanations,
                reasons,
                data,
                out,
            };
            let summary = runner::run(&opts)?;
            for r in &summary.reports {
                println!(
                    "{}: {} cases, {} failed, {} invalid",
                    r.stem(),
                    r.counts.cases,
                    r.counts.failures,
                    r.counts.invalid
                );
            }
            println!("wrote {}", summary.out.display());
        }
        Command::Report { run_dir } => {
            let files = runner::rerender(&run_dir)?;
            println!("rendered {} files in {}", files.len(), run_dir.display());
        }
        Command::Verify { run_dir } => {
            let v = manifest::verify(&run_dir)?;
            for f in &v.mismatched {
                println!("mismatch: {f}");
            }
            for f in &v.missing {
                println!("missing: {f}");
            }
            for f in &v.unexpected {
                println!("unlisted: {f}");
            }
            if !v.ok() {
                bail!("{} failed verification", run_dir.display());
            }
            println!("{} files verified", v.checked);
        }
    }
    Ok(())
}
