//! Files written into an output directory.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use symopt_core::benchmark::{RunRecord, SeedOutcome};
use symopt_core::train::TraceRow;
use symopt_core::TokenLibrary;

use crate::error::CliResult;

pub const CONFIG_FILE: &str = "config.json";
pub const RUNS_FILE: &str = "runs.csv";
pub const CURVES_FILE: &str = "report_curves.csv";
pub const TRACE_COLUMNS: [&str; 6] = ["iter", "evals", "mean_R", "top_eps_mean_R", "best_R", "invalid_frac"];

pub fn trace_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("trace_seed_{seed}.csv"))
}

pub fn best_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("best_seed_{seed}.txt"))
}

pub fn policy_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("policy_seed_{seed}.bin"))
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.iter.to_string(),
            r.evals.to_string(),
            r.mean_r.to_string(),
            r.top_eps_mean_r.to_string(),
            r.best_r.to_string(),
            r.invalid_frac.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> CliResult<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != TRACE_COLUMNS {
        return Err(anyhow::anyhow!("{}: unexpected columns {header:?}", path.display()).into());
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| -> CliResult<f64> {
            rec[i]
                .parse()
                .with_context(|| format!("{}: bad value `{}`", path.display(), &rec[i]))
                .map_err(Into::into)
        };
        rows.push(TraceRow {
            iter: f(0)? as usize,
            evals: f(1)? as u64,
            mean_r: f(2)?,
            top_eps_mean_r: f(3)?,
            best_r: f(4)?,
            invalid_frac: f(5)?,
        });
    }
    Ok(rows)
}

pub fn best_summary(outcome: &SeedOutcome, lib: &TokenLibrary) -> String {
    match &outcome.result.best {
        Some(b) => {
            let ids: Vec<String> = b.traversal.ids().iter().map(|id| id.0.to_string()).collect();
            let constants: Vec<String> = b.constants.iter().map(|c| c.to_string()).collect();
            format!(
                "infix: {}\ntraversal: {}\nids: {}\nconstants: [{}]\nreward: {}\ntrain_nmse: {}\ntest_nmse: {}\nfound_at_iteration: {}\n",
                b.infix,
                b.traversal.to_symbols(lib),
                ids.join(" "),
                constants.join(", "),
                b.reward,
                b.nmse,
                outcome.record.test_nmse,
                b.iteration
            )
        }
        None => "no expression was evaluated\n".to_string(),
    }
}

/// Writes one finished seed. The `runs.csv` row goes last, so a seed with a
/// row is complete.
pub fn write_seed(dir: &Path, outcome: &SeedOutcome, lib: &TokenLibrary) -> CliResult<()> {
    let seed = outcome.record.seed;
    write_trace(&trace_path(dir, seed), &outcome.result.trace)?;
    fs::write(best_path(dir, seed), best_summary(outcome, lib))?;
    outcome.policy.save(&policy_path(dir, seed))?;
    append_record(&dir.join(RUNS_FILE), &outcome.record)
}

pub fn append_record(path: &Path, record: &RunRecord) -> CliResult<()> {
    let fresh = fs::metadata(path).map_or(true, |m| m.len() == 0);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    w.serialize(record)?;
    w.flush()?;
    Ok(())
}

/// Records in `dir/runs.csv`; empty when the file is absent.
pub fn read_records(dir: &Path) -> CliResult<Vec<RunRecord>> {
    let path = dir.join(RUNS_FILE);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut r = csv::Reader::from_path(&path)?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec.with_context(|| format!("reading {}", path.display()))?);
    }
    Ok(out)
}

/// Seeds with a trace file in `dir`, in ascending order.
pub fn traced_seeds(dir: &Path) -> CliResult<Vec<u64>> {
    let mut seeds = Vec::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(s) = name.strip_prefix("trace_seed_").and_then(|s| s.strip_suffix(".csv")) {
            if let Ok(seed) = s.parse() {
                seeds.push(seed);
            }
        }
    }
    seeds.sort_unstable();
    Ok(seeds)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
