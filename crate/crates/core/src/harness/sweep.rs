//! Comparison tables over updaters, schedules, noise rates and target levels.
//!
//! Rows are `schedule x epsilon`; columns are `method x alpha x {CovGap %, Size}`.
//! CovGap is `|mean coverage - (1 - alpha)|` in percent and Size the mean set
//! size, both averaged over the configured seeds.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::config::{ExperimentConfig, ScheduleSpec};
use super::run::{prepare, run_prepared};
use crate::error::{input_err, Result};
use crate::updaters::UpdaterKind;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub schedule: ScheduleSpec,
    pub epsilon: f64,
    pub updater: UpdaterKind,
    pub alpha: f64,
    pub cov_gap_pct: f64,
    pub avg_size: f64,
}

/// Expands the sweep lists into one config per cell; `epsilon_used` follows `epsilon_true`.
pub fn sweep_configs(base: &ExperimentConfig) -> Result<Vec<ExperimentConfig>> {
    let sw = &base.sweep;
    let mut horizons = sw.horizons.clone();
    horizons.sort_unstable();
    horizons.dedup();
    if horizons.len() > 1 {
        return input_err(format!("sweep cells must share one horizon, got {horizons:?}"));
    }
    if sw.updaters.is_empty() || sw.schedules.is_empty() || sw.epsilons.is_empty() || sw.alphas.is_empty() {
        return input_err("every sweep list must be non-empty");
    }
    let mut cells = Vec::new();
    for &schedule in &sw.schedules {
        for &eps in &sw.epsilons {
            for &updater in &sw.updaters {
                for &alpha in &sw.alphas {
                    let mut c = base.clone();
                    c.schedule = schedule;
                    c.epsilon_true = eps;
                    c.epsilon_used = eps;
                    c.updater = updater;
                    c.alpha = alpha;
                    if let Some(&h) = horizons.first() {
                        c.horizon = Some(h);
                    }
                    c.validate()?;
                    cells.push(c);
                }
            }
        }
    }
    Ok(cells)
}

pub fn run_sweep(base: &ExperimentConfig) -> Result<Vec<SweepCell>> {
    let configs = sweep_configs(base)?;
    let prepared = prepare(&configs[0])?;
    configs
        .par_iter()
        .map(|c| {
            let runs = run_prepared(c, &prepared)?;
            let n = runs.len() as f64;
            let cov = runs.iter().map(|r| r.summary.cov).sum::<f64>() / n;
            let size = runs.iter().map(|r| r.summary.avg_size).sum::<f64>() / n;
            Ok(SweepCell {
                schedule: c.schedule,
                epsilon: c.epsilon_true,
                updater: c.updater,
                alpha: c.alpha,
                cov_gap_pct: 100.0 * (cov - (1.0 - c.alpha)).abs(),
                avg_size: size,
            })
        })
        .collect()
}

/// Renders cells in table layout. Missing cells are left empty.
pub fn sweep_table(base: &ExperimentConfig, cells: &[SweepCell]) -> String {
    let sw = &base.sweep;
    let mut out = String::from("schedule,epsilon");
    for u in &sw.updaters {
        for a in &sw.alphas {
            let _ = write!(out, ",{u}_alpha{a}_covgap_pct,{u}_alpha{a}_size");
        }
    }
    out.push('\n');
    for s in &sw.schedules {
        for &e in &sw.epsilons {
            let _ = write!(out, "{},{e}", s.label());
            for &u in &sw.updaters {
                for &a in &sw.alphas {
                    match cells.iter().find(|c| {
                        c.schedule == *s && c.epsilon == e && c.updater == u && c.alpha == a
                    }) {
                        Some(c) => {
                            let _ = write!(out, ",{:.3},{:.3}", c.cov_gap_pct, c.avg_size);
                        }
                        None => out.push_str(",,"),
                    }
                }
            }
            out.push('\n');
        }
    }
    out
}
