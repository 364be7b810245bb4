//! CSV datasets: feature columns followed by one target column.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use symopt_core::expr::variance;
use symopt_core::Dataset;

use crate::error::{CliError, CliResult};

/// Parsed CSV contents.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub rows: Vec<Vec<f64>>,
    pub target: Vec<f64>,
}

impl Table {
    pub fn n_vars(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

fn invalid(path: &Path, msg: String) -> CliError {
    CliError::Invalid(format!("{}: {msg}", path.display()))
}

/// Reads a comma-separated file. The first line is a header when none of
/// its cells parse as numbers.
pub fn read_table(path: &Path) -> CliResult<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| invalid(path, e.to_string()))?;
    let mut rows = Vec::new();
    let mut target = Vec::new();
    let mut width: Option<usize> = None;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| invalid(path, e.to_string()))?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if i == 0 && record.iter().all(|c| c.parse::<f64>().is_err()) {
            width = Some(record.len());
            continue;
        }
        let n = record.len();
        if n < 2 {
            return Err(invalid(path, format!("row {line}: need at least one feature and a target column")));
        }
        match width {
            Some(w) if w != n => {
                return Err(invalid(path, format!("row {line}: expected {w} columns, found {n}")));
            }
            _ => width = Some(n),
        }
        let mut values = Vec::with_capacity(n);
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| invalid(path, format!("row {line}, column {}: `{cell}` is not a number", j + 1)))?;
            if !v.is_finite() {
                return Err(invalid(path, format!("row {line}, column {}: value is not finite", j + 1)));
            }
            values.push(v);
        }
        target.push(values.pop().expect("at least two columns"));
        rows.push(values);
    }
    if rows.len() < 4 {
        return Err(invalid(path, format!("need at least 4 data rows, found {}", rows.len())));
    }
    if variance(&target) == 0.0 {
        return Err(invalid(path, "target column has zero variance, so the reward is undefined".into()));
    }
    Ok(Table { rows, target })
}

/// Shuffles rows with `seed` and holds out `holdout` of them for testing.
pub fn split(table: &Table, holdout: f64, seed: u64) -> CliResult<(Dataset, Dataset)> {
    let n = table.rows.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((n as f64 * holdout).round() as usize).clamp(2, n - 2);
    let (test_idx, train_idx) = order.split_at(n_test);
    let build = |idx: &[usize], which: &str| {
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| table.rows[i].clone()).collect();
        let y = idx.iter().map(|&i| table.target[i]).collect();
        Dataset::from_rows(&rows, y).map_err(|e| CliError::Invalid(format!("{which} split: {e}")))
    };
    Ok((build(train_idx, "training")?, build(test_idx, "test")?))
}
