//! `symopt report`: recovery tables and averaged learning curves.

use std::path::Path;

use symopt_core::benchmark::{format_table, group_records};
use symopt_core::train::TraceRow;

use crate::artifacts::{self, CURVES_FILE};
use crate::error::CliResult;

/// Per-iteration mean over seeds. A seed that stopped early contributes its
/// last row to every later iteration.
pub fn average_curves(traces: &[Vec<TraceRow>]) -> Vec<TraceRow> {
    let traces: Vec<&Vec<TraceRow>> = traces.iter().filter(|t| !t.is_empty()).collect();
    let len = traces.iter().map(|t| t.len()).max().unwrap_or(0);
    let n = traces.len() as f64;
    (0..len)
        .map(|i| {
            let rows: Vec<&TraceRow> = traces.iter().map(|t| &t[i.min(t.len() - 1)]).collect();
            let mean = |f: fn(&TraceRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
            TraceRow {
                iter: i + 1,
                evals: mean(|r| r.evals as f64).round() as u64,
                mean_r: mean(|r| r.mean_r),
                top_eps_mean_r: mean(|r| r.top_eps_mean_r),
                best_r: mean(|r| r.best_r),
                invalid_frac: mean(|r| r.invalid_frac),
            }
        })
        .collect()
}

pub fn execute(dirs: &[&Path]) -> CliResult<()> {
    let mut all = Vec::new();
    for dir in dirs {
        if !dir.is_dir() {
            eprintln!("warning: {} is not a directory", dir.display());
            continue;
        }
        let records = artifacts::read_records(dir)?;
        if records.is_empty() {
            eprintln!("warning: {} holds no completed runs", dir.display());
            continue;
        }
        let mut traces = Vec::new();
        for seed in artifacts::traced_seeds(dir)? {
            traces.push(artifacts::read_trace(&artifacts::trace_path(dir, seed))?);
        }
        if !traces.is_empty() {
            artifacts::write_trace(&dir.join(CURVES_FILE), &average_curves(&traces))?;
        }
        all.extend(records);
    }
    if all.is_empty() {
        eprintln!("warning: nothing to report");
    }
    print!("{}", format_table(&group_records(&all)));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(iter: usize, best: f64) -> TraceRow {
        TraceRow { iter, evals: iter as u64 * 10, mean_r: best / 2.0, top_eps_mean_r: best, best_r: best, invalid_frac: 0.0 }
    }

    #[test]
    fn finished_seeds_carry_forward() {
        let a = vec![row(1, 0.2), row(2, 1.0)];
        let b = vec![row(1, 0.4), row(2, 0.6), row(3, 0.8), row(4, 0.9)];
        let avg = average_curves(&[a, b]);
        assert_eq!(avg.len(), 4);
        assert!((avg[0].best_r - 0.3).abs() < 1e-12);
        assert!((avg[3].best_r - 0.95).abs() < 1e-12);
        assert_eq!(avg[3].iter, 4);
    }

    #[test]
    fn no_traces_no_curve() {
        assert!(average_curves(&[]).is_empty());
        assert!(average_curves(&[Vec::new()]).is_empty());
    }
}
