//! Deterministic CSV/JSON emission.
//!
//! Layout of a run directory:
//!
//! ```text
//! <out>/aggregate.csv            one row per seed plus a "mean" row
//! <out>/seed-<s>/summary.json    metrics, prefix errors and theory-check verdicts
//! <out>/seed-<s>/steps.csv       per-step records (opt-in above 100k steps)
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::run::{PrefixMetrics, SeedRun};
use crate::error::{Error, Result};
use crate::metrics::{RunSummary, StepRecord};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ROBUST_OCP_OUT_DIR";

/// `--out`, then the config's `output_dir`, then [`OUT_DIR_ENV`], then `./out`.
pub fn resolve_out_dir(cli: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

#[derive(Debug, Serialize)]
struct SeedReport<'a> {
    updater: String,
    score: String,
    schedule: &'a str,
    epsilon_true: f64,
    epsilon_used: f64,
    #[serde(flatten)]
    summary: &'a RunSummary,
    prefixes: &'a [PrefixMetrics],
}

pub fn summary_json(config: &ExperimentConfig, run: &SeedRun) -> Result<String> {
    let report = SeedReport {
        updater: config.updater.to_string(),
        score: config.score.kind.to_string(),
        schedule: config.schedule.label(),
        epsilon_true: config.epsilon_true,
        epsilon_used: config.epsilon_used,
        summary: &run.summary,
        prefixes: &run.prefixes,
    };
    let mut s = serde_json::to_string_pretty(&report)?;
    s.push('\n');
    Ok(s)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_steps_csv(path: &Path, records: &[StepRecord<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record([
        "t",
        "tau",
        "set_size",
        "covered_clean",
        "covered_noisy",
        "miscover_prob",
        "pinball",
        "robust_pinball",
        "grad",
    ])
    .map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.t.to_string(),
            r.tau.to_string(),
            r.set_size.to_string(),
            u8::from(r.covered_clean).to_string(),
            u8::from(r.covered_noisy).to_string(),
            opt(r.miscover_prob),
            r.pinball.to_string(),
            r.robust_pinball.to_string(),
            r.grad.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Input(format!("csv: {other:?}")),
    }
}

/// Cross-seed table: one row per seed and a final mean row.
pub fn aggregate_csv(runs: &[SeedRun]) -> String {
    let mut out = String::from(
        "seed,cov,cov_gap,avg_size,em_err,ex_err,regret,local_cov_min,checks_failed\n",
    );
    let row = |out: &mut String, seed: &str, s: [Option<f64>; 7], failed: usize| {
        let cells: Vec<String> = s.iter().map(|v| opt(*v)).collect();
        let _ = writeln!(out, "{seed},{},{failed}", cells.join(","));
    };
    let failed_of = |s: &RunSummary| s.theory_checks.values().filter(|v| !v.passed).count();
    for r in runs {
        let s = &r.summary;
        row(
            &mut out,
            &s.seed.to_string(),
            [
                Some(s.cov),
                Some(s.cov_gap),
                Some(s.avg_size),
                Some(s.em_err),
                s.ex_err,
                Some(s.regret),
                s.local_cov_min,
            ],
            failed_of(s),
        );
    }
    if !runs.is_empty() {
        let n = runs.len() as f64;
        let mean = |f: &dyn Fn(&RunSummary) -> Option<f64>| {
            runs.iter()
                .map(|r| f(&r.summary))
                .sum::<Option<f64>>()
                .map(|v| v / n)
        };
        row(
            &mut out,
            "mean",
            [
                mean(&|s| Some(s.cov)),
                mean(&|s| Some(s.cov_gap)),
                mean(&|s| Some(s.avg_size)),
                mean(&|s| Some(s.em_err)),
                mean(&|s| s.ex_err),
                mean(&|s| Some(s.regret)),
                mean(&|s| s.local_cov_min),
            ],
            runs.iter().map(|r| failed_of(&r.summary)).sum(),
        );
    }
    out
}

/// Writes every output of a run; returns the paths written.
pub fn write_run_outputs(
    out_dir: &Path,
    config: &ExperimentConfig,
    runs: &[SeedRun],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for run in runs {
        let dir = out_dir.join(format!("seed-{}", run.summary.seed));
        fs::create_dir_all(&dir)?;
        let summary = dir.join("summary.json");
        fs::write(&summary, summary_json(config, run)?)?;
        written.push(summary);
        if config.emit_steps || run.records.len() <= ExperimentConfig::STEPS_CSV_LIMIT {
            let steps = dir.join("steps.csv");
            write_steps_csv(&steps, &run.records)?;
            written.push(steps);
        }
    }
    let agg = out_dir.join("aggregate.csv");
    fs::write(&agg, aggregate_csv(runs))?;
    written.push(agg);
    Ok(written)
}
