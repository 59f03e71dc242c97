//! Seeded execution: stream -> scores -> prediction set -> noisy label -> update.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, StreamSpec};
use crate::error::{Error, Result};
use crate::losses::{pinball_loss, LossParams, Objective, Observation};
use crate::metrics::{
    empirical_coverage_error, expected_coverage_error, long_run_coverage, RegretTracker,
    RunSummary, StepRecord,
};
use crate::noise::NoiseChannel;
use crate::streams::{load_stream, Record, ScoredStream, Source};
use crate::updaters::{Updater, UpdaterKind, UpdaterParams};
use crate::verify::{
    check_threshold_bounds, predicted_coverage_gap, regret_bound, CheckVerdict,
};

/// Tolerance of the predicted-gap comparison for baseline constant-rate runs.
pub const GAP_TOLERANCE: f64 = 0.02;
/// Tolerance on SAOCP weight sums.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Coverage errors over a prefix of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrefixMetrics {
    pub t: usize,
    pub cov: f64,
    pub em_err: f64,
    pub ex_err: Option<f64>,
}

/// Summary plus everything else one seed produced.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub summary: RunSummary,
    pub prefixes: Vec<PrefixMetrics>,
    pub records: Vec<StepRecord<f64>>,
    /// Threshold after the last update.
    pub final_tau: f64,
}

impl SeedRun {
    /// `tau_1..=tau_{T+1}`.
    pub fn trajectory(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.tau).chain([self.final_tau]).collect()
    }
}

/// Data shared by every seed of an experiment.
#[derive(Debug, Clone)]
pub struct Prepared {
    records: Option<Arc<Vec<Record<f64>>>>,
    pub num_classes: usize,
    pub horizon: usize,
}

/// Loads stream files once and fixes `K` and `T`.
pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    config.validate()?;
    match &config.stream {
        StreamSpec::Synthetic { num_classes, .. } => Ok(Prepared {
            records: None,
            num_classes: *num_classes,
            horizon: config.horizon.expect("validated"),
        }),
        StreamSpec::File { path, format, csv_header } => {
            let records = load_stream::<f64>(path, *format, *csv_header).map_err(|e| match e {
                Error::Io(io) => Error::Config(format!("cannot read {}: {io}", path.display())),
                other => other,
            })?;
            let horizon = config.horizon.unwrap_or(records.len());
            if horizon > records.len() {
                return Err(Error::Config(format!(
                    "horizon {horizon} exceeds the {} records in {}",
                    records.len(),
                    path.display()
                )));
            }
            Ok(Prepared {
                num_classes: records[0].0.num_classes(),
                records: Some(Arc::new(records)),
                horizon,
            })
        }
    }
}

fn finite(x: f64, what: &'static str, step: usize) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite { what, step })
    }
}

/// Runs one seed.
pub fn run_seed(config: &ExperimentConfig, prepared: &Prepared, seed: u64) -> Result<SeedRun> {
    let k = prepared.num_classes;
    let horizon = prepared.horizon;
    let source = match &prepared.records {
        Some(records) => Source::records(records.clone(), horizon)?,
        None => Source::synthetic(config.stream.synth_config(horizon, seed).expect("synthetic"))?,
    };
    let calibrated = source.is_calibrated();
    let channel = NoiseChannel::new(config.epsilon_true, config.epsilon_used, k)?;
    let stream = ScoredStream::new(source, channel, config.score, seed);

    let loss_params = LossParams::new(config.alpha, config.epsilon_used, k)?;
    let robust_objective = Objective::robust(loss_params);
    let schedule = config.learning_rate();
    let mut updater = Updater::new(
        config.updater,
        &UpdaterParams {
            tau1: config.tau1(),
            schedule,
            sf_eta: config.sf_eta,
            lifetime_multiplier: config.lifetime_multiplier,
        },
        robust_objective,
    );
    let mut regret = RegretTracker::new(updater.objective());
    let mut weight_dev: Option<f64> = None;
    let mut grad_sum = 0.0;
    let mut records = Vec::with_capacity(horizon);

    for (i, step) in stream.enumerate() {
        let t = i + 1;
        let step = step?;
        let tau = finite(updater.threshold(), "threshold", t)?;
        if let Some(sum) = updater.weight_sum() {
            let dev = finite(sum, "expert weights", t)? - 1.0;
            weight_dev = Some(weight_dev.unwrap_or(0.0).max(dev.abs()));
        }
        let mut set_size = 0;
        let mut outside = 0.0;
        for (&s, &p) in step.scores_all.iter().zip(step.probs.as_slice()) {
            if s <= tau {
                set_size += 1;
            } else {
                outside += p;
            }
        }
        let obs = Observation {
            s_noisy: step.s_noisy,
            scores_all: &step.scores_all,
        };
        regret.observe(tau, &obs);
        let grad = finite(updater.update(&obs), "gradient", t)?;
        grad_sum += grad;
        records.push(StepRecord {
            t,
            tau,
            set_size,
            covered_clean: step.s_clean <= tau,
            covered_noisy: step.s_noisy <= tau,
            miscover_prob: calibrated.then_some(outside),
            pinball: pinball_loss(tau, step.s_noisy, config.alpha),
            robust_pinball: robust_objective.loss(tau, &obs),
            grad,
        });
    }
    let final_tau = finite(updater.threshold(), "threshold", horizon + 1)?;

    let mut checks = BTreeMap::new();
    let mut add = |v: CheckVerdict| {
        checks.insert(v.name.clone(), v);
    };
    let kind = config.updater;
    if kind.is_aci() {
        let mut traj: Vec<f64> = records.iter().map(|r| r.tau).collect();
        traj.push(final_tau);
        if (0.0..=1.0).contains(&config.tau1()) {
            add(check_threshold_bounds(&traj, kind, &schedule, config.alpha, config.epsilon_used)?);
            let eps_loss = if kind.is_robust() { config.epsilon_used } else { 0.0 };
            add(CheckVerdict::upper_bound(
                "regret_bound",
                regret.regret(),
                regret_bound(&schedule, eps_loss, horizon),
                0.0,
            ));
        }
        if let crate::updaters::LearningRateSchedule::Constant(eta) = schedule {
            let predicted = (config.tau1() - final_tau) / eta;
            add(CheckVerdict::equality(
                "telescoping",
                grad_sum,
                predicted,
                1e-9 * (horizon as f64).max(1.0 / eta),
            ));
            if kind == UpdaterKind::Aci && calibrated && config.epsilon_true > 0.0 {
                let sizes: Vec<usize> = records.iter().map(|r| r.set_size).collect();
                let cov = long_run_coverage(&records, horizon)?;
                add(CheckVerdict::equality(
                    "coverage_gap_prediction",
                    cov - (1.0 - config.alpha),
                    predicted_coverage_gap(&sizes, k, config.alpha, config.epsilon_true),
                    GAP_TOLERANCE,
                ));
            }
        }
    }
    if let Some(dev) = weight_dev {
        add(CheckVerdict::upper_bound("weight_sum", dev, 0.0, WEIGHT_SUM_TOLERANCE));
    }

    let summary = RunSummary::from_records(
        seed,
        &records,
        config.alpha,
        config.local_window,
        regret.regret(),
        checks,
    )?;
    let prefixes = config
        .checkpoints
        .iter()
        .filter(|&&t| t >= 1 && t <= horizon)
        .map(|&t| {
            Ok(PrefixMetrics {
                t,
                cov: long_run_coverage(&records, t)?,
                em_err: empirical_coverage_error(&records, t, config.alpha)?,
                ex_err: calibrated
                    .then(|| expected_coverage_error(&records, t, config.alpha))
                    .transpose()?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SeedRun {
        summary,
        prefixes,
        records,
        final_tau,
    })
}

/// Runs every configured seed in parallel; results are in seed-list order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<SeedRun>> {
    let prepared = prepare(config)?;
    run_prepared(config, &prepared)
}

pub fn run_prepared(config: &ExperimentConfig, prepared: &Prepared) -> Result<Vec<SeedRun>> {
    config
        .seeds
        .par_iter()
        .map(|&seed| run_seed(config, prepared, seed))
        .collect()
}
