//! Plot-ready CSV files for runs and aggregates.
//!
//! Run files have the header `iteration,strategy,seed,metric,cumulative_samples`.
//! The aggregate file repeats every run row and adds the strategy's mean
//! metric and the run's paired difference to its baseline run. A summary
//! file holds one row per (iteration, strategy) with the mean series and
//! the mean difference.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::engine::{self, AggregateResult, RunResult, StrategyKind};
use crate::error::{Error, Result};

pub const RUN_HEADER: &str = "iteration,strategy,seed,metric,cumulative_samples";
pub const AGGREGATE_HEADER: &str =
    "iteration,strategy,seed,metric,cumulative_samples,mean_metric,diff_vs_baseline";
pub const SUMMARY_HEADER: &str = "iteration,strategy,mean_metric,mean_diff_vs_baseline";

pub const RUNS_DIR: &str = "runs";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

pub fn run_file_name(run: &RunResult) -> String {
    format!("{}_{}.csv", run.strategy, run.seed)
}

pub fn run_to_csv(run: &RunResult) -> String {
    let mut out = format!("{RUN_HEADER}\n");
    for (t, (m, c)) in run.metric_series.iter().zip(&run.cumulative_samples).enumerate() {
        writeln!(out, "{t},{},{},{m},{c}", run.strategy, run.seed).expect("writing to a String");
    }
    out
}

/// Parses a run file. Metrics round-trip exactly.
pub fn run_from_csv(text: &str, dataset: &str) -> Result<RunResult> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != RUN_HEADER {
        return Err(Error::InvalidDataset(format!("unexpected run header `{}`", header.join(","))));
    }
    let mut strategy = None;
    let mut seed = None;
    let mut metric_series = Vec::new();
    let mut cumulative_samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let bad = |what: &str| Error::InvalidDataset(format!("row {}: bad {what}", row + 1));
        let t: usize = field(0).parse().map_err(|_| bad("iteration"))?;
        if t != row {
            return Err(bad("iteration order"));
        }
        let s: StrategyKind = field(1).parse()?;
        let sd: u64 = field(2).parse().map_err(|_| bad("seed"))?;
        if *strategy.get_or_insert(s) != s || *seed.get_or_insert(sd) != sd {
            return Err(bad("strategy or seed (mixed runs)"));
        }
        metric_series.push(field(3).parse().map_err(|_| bad("metric"))?);
        cumulative_samples.push(field(4).parse().map_err(|_| bad("cumulative_samples"))?);
    }
    let (Some(strategy), Some(seed)) = (strategy, seed) else {
        return Err(Error::InvalidDataset("run file has no rows".into()));
    };
    Ok(RunResult {
        strategy,
        seed,
        dataset: dataset.to_string(),
        metric_series,
        cumulative_samples,
        queries: Vec::new(),
    })
}

pub fn aggregate_to_csv(agg: &AggregateResult) -> String {
    let mut out = format!("{AGGREGATE_HEADER}\n");
    for run in &agg.runs {
        let summary = agg.strategy(run.strategy).expect("every run has a summary");
        let diff = summary.diffs.iter().find(|(s, _)| *s == run.seed).map(|(_, d)| d);
        for t in 0..run.metric_series.len() {
            let d = diff.map(|d| d[t].to_string()).unwrap_or_default();
            writeln!(
                out,
                "{t},{},{},{},{},{},{d}",
                run.strategy, run.seed, run.metric_series[t], run.cumulative_samples[t], summary.mean_series[t]
            )
            .expect("writing to a String");
        }
    }
    out
}

pub fn summary_to_csv(agg: &AggregateResult) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for s in &agg.strategies {
        for (t, m) in s.mean_series.iter().enumerate() {
            let d = s.mean_diff.as_ref().map(|d| d[t].to_string()).unwrap_or_default();
            writeln!(out, "{t},{},{m},{d}", s.strategy).expect("writing to a String");
        }
    }
    out
}

/// Writes one file per run under `dir/runs` plus the aggregate and summary.
pub fn write_all(dir: &Path, agg: &AggregateResult) -> Result<()> {
    let runs = dir.join(RUNS_DIR);
    fs::create_dir_all(&runs)?;
    for run in &agg.runs {
        fs::write(runs.join(run_file_name(run)), run_to_csv(run))?;
    }
    write_aggregate(dir, agg)
}

pub fn write_aggregate(dir: &Path, agg: &AggregateResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(AGGREGATE_FILE), aggregate_to_csv(agg))?;
    fs::write(dir.join(SUMMARY_FILE), summary_to_csv(agg))?;
    Ok(())
}

/// Run files in `dir` (or `dir/runs` if present), sorted by name.
pub fn run_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let nested = dir.join(RUNS_DIR);
    let dir = if nested.is_dir() { nested } else { dir.to_path_buf() };
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(&dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| {
        p.extension().is_some_and(|e| e == "csv")
            && p.file_name().is_some_and(|n| n != AGGREGATE_FILE && n != SUMMARY_FILE)
    });
    files.sort();
    Ok(files)
}

/// Reads every run file in `dir` and aggregates them. Fails if there is no
/// baseline run to pair against.
pub fn aggregate_dir(dir: &Path) -> Result<AggregateResult> {
    let files = run_files(dir)?;
    if files.is_empty() {
        return Err(Error::InvalidDataset(format!("no run files in {}", dir.display())));
    }
    let runs = files
        .iter()
        .map(|p| run_from_csv(&fs::read_to_string(p)?, ""))
        .collect::<Result<Vec<_>>>()?;
    if !runs.iter().any(|r| r.strategy == StrategyKind::Baseline) {
        return Err(Error::InvalidArgument("no baseline runs to compare against".into()));
    }
    engine::aggregate(runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(strategy: StrategyKind, seed: u64, metric_series: Vec<f64>) -> RunResult {
        let n = metric_series.len();
        RunResult {
            strategy,
            seed,
            dataset: String::new(),
            metric_series,
            cumulative_samples: (0..n).map(|t| 2 + 11 * t).collect(),
            queries: Vec::new(),
        }
    }

    #[test]
    fn run_round_trip_is_exact() {
        let r = run(StrategyKind::Caipi, 17, vec![0.1 + 0.2, 1e-300, 2.0 / 3.0]);
        let text = run_to_csv(&r);
        assert!(text.starts_with(RUN_HEADER));
        assert_eq!(run_from_csv(&text, "").unwrap(), r);
    }

    #[test]
    fn mixed_runs_rejected() {
        let text = format!("{RUN_HEADER}\n0,baseline,1,0.5,2\n1,caipi,1,0.5,13\n");
        assert!(run_from_csv(&text, "").is_err());
        assert!(run_from_csv("a,b\n", "").is_err());
    }

    #[test]
    fn aggregate_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let agg = engine::aggregate(vec![
            run(StrategyKind::Baseline, 1, vec![1.0, 0.5]),
            run(StrategyKind::InteractiveOcclusion, 1, vec![1.0, 0.25]),
        ])
        .unwrap();
        write_all(dir.path(), &agg).unwrap();
        let again = aggregate_dir(dir.path()).unwrap();
        assert_eq!(aggregate_to_csv(&again), aggregate_to_csv(&agg));
        let text = fs::read_to_string(dir.path().join(AGGREGATE_FILE)).unwrap();
        assert!(text.contains("1,baseline,1,0.5,13,0.5,0\n"));
        assert!(text.contains("1,interactive_occlusion,1,0.25,13,0.25,-0.25\n"));
    }

    #[test]
    fn aggregate_needs_baseline() {
        let dir = tempfile::tempdir().unwrap();
        let agg = engine::aggregate(vec![run(StrategyKind::Caipi, 1, vec![1.0])]).unwrap();
        write_all(dir.path(), &agg).unwrap();
        assert!(aggregate_dir(dir.path()).is_err());
    }
}
