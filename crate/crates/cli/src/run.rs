//! `symopt run`: seeds of one experiment, written as they finish.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde_json::Value;
use symopt_core::benchmark::{format_table, group_records, run_seed, search_seed, SeedOutcome, KOZA_OPERATORS};
use symopt_core::TokenLibrary;

use crate::artifacts::{self, CONFIG_FILE};
use crate::config::{read_config_value, resolve, Problem, RunConfig};
use crate::data::{read_table, split, Table};
use crate::error::{CliError, CliResult};

/// Search settings shared by `run` and `fit`.
#[derive(Clone, Debug, Default)]
pub struct SearchOptions {
    pub config: Option<PathBuf>,
    /// `Some(true)` adds a default gp section unless one exists,
    /// `Some(false)` removes it.
    pub gp: Option<bool>,
    /// Flag-derived overrides followed by explicit `--set` pairs.
    pub overrides: Vec<(String, String)>,
}

impl SearchOptions {
    /// Final config: `base` (or the `--config` file), the gp switch, then
    /// the overrides in order.
    pub fn resolve(&self, base: Option<Value>) -> CliResult<RunConfig> {
        let mut value = match (base, &self.config) {
            (Some(v), _) => v,
            (None, Some(path)) => read_config_value(path)?,
            (None, None) => Value::Object(Default::default()),
        };
        if let (Some(on), Value::Object(map)) = (self.gp, &mut value) {
            let present = map.get("gp").is_some_and(|g| !g.is_null());
            if !on {
                map.insert("gp".into(), Value::Null);
            } else if !present {
                map.insert("gp".into(), Value::Object(Default::default()));
            }
        }
        resolve(Some(value), &self.overrides)
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub search: SearchOptions,
    pub out: Option<PathBuf>,
    pub resume: bool,
    pub jobs: usize,
}

/// Library for a CSV dataset: the configured tokens, or the Koza operators
/// with every input variable and a constant placeholder.
pub fn dataset_library(cfg: &RunConfig, n_vars: usize) -> CliResult<TokenLibrary> {
    let symbols: Vec<String> = match &cfg.library {
        Some(s) => s.clone(),
        None => KOZA_OPERATORS
            .iter()
            .map(|s| s.to_string())
            .chain((1..=n_vars).map(|i| format!("x{i}")))
            .chain(["const".to_string()])
            .collect(),
    };
    Ok(TokenLibrary::from_symbols(&symbols)?)
}

fn dataset_name(path: &Path) -> String {
    path.file_stem().map_or("dataset".into(), |s| s.to_string_lossy().into_owned())
}

/// Top-level keys whose values differ, ignoring the seed range and output
/// location.
fn changed_fields(a: &RunConfig, b: &RunConfig) -> CliResult<Vec<String>> {
    let to_map = |c: &RunConfig| -> CliResult<serde_json::Map<String, Value>> {
        match serde_json::to_value(c).map_err(anyhow::Error::from)? {
            Value::Object(m) => Ok(m),
            _ => Err(anyhow!("config did not serialize to an object").into()),
        }
    };
    let (ma, mb) = (to_map(a)?, to_map(b)?);
    Ok(ma
        .iter()
        .filter(|(k, _)| !matches!(k.as_str(), "seeds" | "first_seed" | "output_dir"))
        .filter(|(k, v)| mb.get(*k) != Some(*v))
        .map(|(k, _)| k.clone())
        .collect())
}

struct Prepared {
    cfg: RunConfig,
    problem: Problem,
    name: String,
    lib: TokenLibrary,
    table: Option<Table>,
    dir: PathBuf,
}

fn prepare(opts: &RunOptions, output_root: &Path, base: Option<Value>) -> CliResult<Prepared> {
    let mut cfg = opts.search.resolve(base)?;
    cfg.validate()?;
    let problem = cfg.problem()?;
    let (name, lib, table) = match &problem {
        Problem::Benchmark(spec) => (spec.name.clone(), cfg.experiment().library_for(spec)?, None),
        Problem::Dataset(path) => {
            let t = read_table(path)?;
            let lib = dataset_library(&cfg, t.n_vars())?;
            (dataset_name(path), lib, Some(t))
        }
    };
    cfg.check_satisfiable(&lib)?;
    let dir = opts
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| output_root.join(format!("{name}-{}", cfg.experiment().trainer_label())));
    cfg.output_dir = Some(dir.clone());
    Ok(Prepared { cfg, problem, name, lib, table, dir })
}

fn run_one(p: &Prepared, seed: u64) -> CliResult<SeedOutcome> {
    let exp = p.cfg.experiment();
    match (&p.problem, &p.table) {
        (Problem::Benchmark(spec), _) => Ok(run_seed(spec, &exp, seed)?),
        (Problem::Dataset(_), Some(table)) => {
            let (train, test) = split(table, p.cfg.holdout, seed)?;
            Ok(search_seed(&p.name, &exp, &p.lib, &train, &test, None, seed)?)
        }
        (Problem::Dataset(_), None) => Err(anyhow!("dataset was not loaded").into()),
    }
}

pub fn execute(opts: &RunOptions, output_root: &Path) -> CliResult<()> {
    let from_snapshot = opts.resume && opts.search.config.is_none();
    let early = opts.out.as_ref().map(|d| d.join(CONFIG_FILE)).filter(|p| from_snapshot && p.exists());
    let mut p = match &early {
        Some(path) => prepare(opts, output_root, Some(read_config_value(path)?))?,
        None => prepare(opts, output_root, None)?,
    };
    let snapshot_path = p.dir.join(CONFIG_FILE);
    if early.is_none() && from_snapshot && snapshot_path.exists() {
        p = prepare(opts, output_root, Some(read_config_value(&snapshot_path)?))?;
    }
    fs::create_dir_all(&p.dir).with_context(|| format!("creating {}", p.dir.display()))?;
    let existing = artifacts::read_records(&p.dir)?;
    if !existing.is_empty() && !opts.resume {
        return Err(anyhow!(
            "{} already holds {} run records; pass --resume to continue it or choose another --out",
            p.dir.display(),
            existing.len()
        )
        .into());
    }
    if snapshot_path.exists() {
        let previous: RunConfig = serde_json::from_value(read_config_value(&snapshot_path)?)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", snapshot_path.display())))?;
        let changed = changed_fields(&previous, &p.cfg)?;
        if opts.resume && !changed.is_empty() {
            return Err(CliError::Invalid(format!(
                "cannot resume {}: config differs from its snapshot in {}",
                p.dir.display(),
                changed.join(", ")
            )));
        }
    }
    let snapshot = serde_json::to_string_pretty(&p.cfg).map_err(anyhow::Error::from)?;
    artifacts::write_text(&snapshot_path, &(snapshot + "\n"))?;

    let done: BTreeSet<u64> = existing.iter().map(|r| r.seed).collect();
    let todo: Vec<u64> = p.cfg.seed_list().into_iter().filter(|s| !done.contains(s)).collect();
    eprintln!(
        "{} ({}): {} seeds to run, {} already complete, writing to {}",
        p.name,
        p.cfg.experiment().trainer_label(),
        todo.len(),
        p.cfg.seeds as usize - todo.len(),
        p.dir.display()
    );
    let writer = Mutex::new(());
    let task = |seed: &u64| -> CliResult<()> {
        let o = run_one(&p, *seed)?;
        let _guard = writer.lock().map_err(|_| anyhow!("writer lock poisoned"))?;
        artifacts::write_seed(&p.dir, &o, &p.lib)?;
        let r = &o.record;
        let status = match r.steps_to_solve {
            Some(i) => format!("recovered at iteration {i}"),
            None => format!("best reward {:.4}", r.best_reward),
        };
        eprintln!("seed {}: {status}, {} evaluations, {:.1}s", r.seed, r.evals_used, r.wall_time);
        Ok(())
    };
    let jobs = opts.jobs.max(1);
    if jobs == 1 {
        todo.iter().try_for_each(task)?;
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| anyhow!("cannot start {jobs} workers: {e}"))?;
        pool.install(|| todo.par_iter().try_for_each(task))?;
    }
    let records = artifacts::read_records(&p.dir)?;
    print!("{}", format_table(&group_records(&records)));
    Ok(())
}
