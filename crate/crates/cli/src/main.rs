//! `symopt`: run, resume and report symbolic regression experiments.

mod artifacts;
mod config;
mod data;
mod error;
mod fit;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use symopt_core::verify;

use crate::config::parse_assignment;
use crate::error::CliResult;
use crate::run::{RunOptions, SearchOptions};

#[derive(Parser)]
#[command(name = "symopt", version, about = "Symbolic regression by risk-seeking policy gradient")]
struct Cli {
    /// Directory under which runs without --out are written.
    #[arg(long, env = "SYMOPT_OUTPUT_ROOT", default_value = "runs", global = true)]
    output_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment on a benchmark or CSV dataset.
    Run(RunArgs),
    /// Summarize output directories and write averaged learning curves.
    Report {
        /// Output directories written by `run`.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
    /// Search for an expression that fits a CSV dataset.
    Fit(FitArgs),
    /// Check gradients and invariants against independent oracles.
    Selftest {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Trainer {
    Vpg,
    Rspg,
    Pqt,
}

impl Trainer {
    fn name(self) -> &'static str {
        match self {
            Trainer::Vpg => "vpg",
            Trainer::Rspg => "rspg",
            Trainer::Pqt => "pqt",
        }
    }
}

#[derive(Args)]
struct SearchArgs {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted-path override such as `trainer.epsilon=0.1`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, value_enum)]
    trainer: Option<Trainer>,
    /// Seed each batch from a genetic programming inner loop.
    #[arg(long, conflicts_with = "no_gp")]
    gp: bool,
    /// Disable the genetic programming inner loop.
    #[arg(long)]
    no_gp: bool,
    /// Total expression evaluations per seed.
    #[arg(long)]
    max_evals: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    search: SearchArgs,
    /// Registered benchmark, e.g. `nguyen-5`.
    #[arg(long)]
    benchmark: Option<String>,
    /// CSV file with feature columns followed by the target.
    #[arg(long, conflicts_with = "benchmark")]
    dataset: Option<PathBuf>,
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    first_seed: Option<u64>,
    /// Output directory (default: <output-root>/<benchmark>-<trainer>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Continue an output directory, skipping seeds already recorded.
    #[arg(long)]
    resume: bool,
    /// Seeds run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct FitArgs {
    /// CSV file with feature columns followed by the target.
    data: PathBuf,
    #[command(flatten)]
    search: SearchArgs,
    /// Seed for the holdout split and the search (default: config first_seed).
    #[arg(long)]
    seed: Option<u64>,
}

impl SearchArgs {
    fn options(&self, mut flags: Vec<(String, String)>) -> CliResult<SearchOptions> {
        if let Some(t) = self.trainer {
            flags.push(("trainer.kind".into(), t.name().into()));
        }
        if let Some(n) = self.max_evals {
            flags.push(("trainer.max_evaluations".into(), n.to_string()));
        }
        for s in &self.set {
            flags.push(parse_assignment(s)?);
        }
        let gp = match (self.gp, self.no_gp) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        };
        Ok(SearchOptions { config: self.config.clone(), gp, overrides: flags })
    }
}

fn run_command(args: &RunArgs, output_root: &std::path::Path) -> CliResult<()> {
    let mut flags = Vec::new();
    if let Some(b) = &args.benchmark {
        flags.push(("benchmark".to_string(), serde_json::Value::String(b.clone()).to_string()));
        flags.push(("dataset".to_string(), "null".to_string()));
    }
    if let Some(d) = &args.dataset {
        flags.push(("dataset".to_string(), serde_json::Value::String(d.display().to_string()).to_string()));
        flags.push(("benchmark".to_string(), "null".to_string()));
    }
    if let Some(n) = args.seeds {
        flags.push(("seeds".into(), n.to_string()));
    }
    if let Some(n) = args.first_seed {
        flags.push(("first_seed".into(), n.to_string()));
    }
    let opts = RunOptions {
        search: args.search.options(flags)?,
        out: args.out.clone(),
        resume: args.resume,
        jobs: args.jobs,
    };
    run::execute(&opts, output_root)
}

fn selftest(seed: u64) -> ExitCode {
    let outcomes = verify::selftest(seed);
    let mut failed = 0;
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
        failed += usize::from(!o.passed);
    }
    println!("{} of {} checks passed", outcomes.len() - failed, outcomes.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run_command(args, &cli.output_root),
        Command::Report { dirs } => {
            let dirs: Vec<&std::path::Path> = dirs.iter().map(PathBuf::as_path).collect();
            report::execute(&dirs)
        }
        Command::Fit(args) => args.search.options(Vec::new()).and_then(|s| fit::execute(&args.data, &s, args.seed)),
        Command::Selftest { seed } => return selftest(*seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
