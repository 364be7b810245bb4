//! `symopt fit`: one search on a CSV dataset.

use std::path::Path;

use symopt_core::benchmark::search_seed;

use crate::data::{read_table, split};
use crate::error::{CliError, CliResult};
use crate::run::{dataset_library, SearchOptions};

pub fn execute(data: &Path, search: &SearchOptions, seed: Option<u64>) -> CliResult<()> {
    let mut cfg = search.resolve(None)?;
    cfg.benchmark = None;
    cfg.dataset = Some(data.to_path_buf());
    cfg.validate()?;
    let table = read_table(data)?;
    let lib = dataset_library(&cfg, table.n_vars())?;
    cfg.check_satisfiable(&lib)?;
    let seed = seed.unwrap_or(cfg.first_seed);
    let (train, test) = split(&table, cfg.holdout, seed)?;
    let name = data.file_stem().map_or("dataset".into(), |s| s.to_string_lossy().into_owned());
    let outcome = search_seed(&name, &cfg.experiment(), &lib, &train, &test, None, seed)?;
    let best = outcome
        .result
        .best
        .as_ref()
        .ok_or_else(|| CliError::Failed(anyhow::anyhow!("the evaluation budget ended before any expression was scored")))?;
    println!("expression: {}", best.infix);
    println!("traversal: {}", best.traversal.to_symbols(&lib));
    println!("reward: {}", best.reward);
    println!("train_nmse: {}", best.nmse);
    println!("test_nmse: {}", outcome.record.test_nmse);
    println!("evaluations: {}", outcome.record.evals_used);
    Ok(())
}
