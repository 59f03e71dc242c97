//! Evaluation quantities: coverage, local coverage, set size, empirical and
//! expected coverage errors, and regret against the best fixed threshold.
//!
//! Time indices are 1-based: `records[0]` is step `t = 1`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Error, Result};
use crate::losses::{pinball_loss, Objective, Observation};
use crate::scalar::Scalar;
use crate::verify::CheckVerdict;

/// One step of a run, as written to `steps.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord<F> {
    pub t: usize,
    pub tau: F,
    pub set_size: usize,
    /// Clean label inside the set.
    pub covered_clean: bool,
    pub covered_noisy: bool,
    /// Exact probability mass outside the set; synthetic streams only.
    pub miscover_prob: Option<F>,
    /// Pinball loss of the noisy score at `tau`.
    pub pinball: F,
    /// Robust pinball loss at `tau` with the configured noise rate.
    pub robust_pinball: F,
    /// Gradient the updater applied.
    pub grad: F,
}

fn check_prefix<F>(records: &[StepRecord<F>], t: usize) -> Result<()> {
    if t == 0 {
        return input_err("horizon T must be >= 1");
    }
    if t > records.len() {
        return input_err(format!("T = {t} exceeds the {} recorded steps", records.len()));
    }
    Ok(())
}

/// `Cov(T)`: fraction of the first `T` steps whose set holds the clean label.
pub fn long_run_coverage<F>(records: &[StepRecord<F>], t: usize) -> Result<f64> {
    check_prefix(records, t)?;
    let hits = records[..t].iter().filter(|r| r.covered_clean).count();
    Ok(hits as f64 / t as f64)
}

/// Mean clean coverage over steps `T..=T+L` (both ends inclusive, `L + 1` steps).
pub fn local_coverage<F>(records: &[StepRecord<F>], t: usize, window: usize) -> Result<f64> {
    if t == 0 || t + window > records.len() {
        return input_err(format!(
            "window [{t}, {}] outside the {} recorded steps",
            t + window,
            records.len()
        ));
    }
    let hits = records[t - 1..t + window].iter().filter(|r| r.covered_clean).count();
    Ok(hits as f64 / (window + 1) as f64)
}

/// Local coverage for every admissible start `T = 1..=n-L`, by a sliding sum.
pub fn local_coverage_series<F>(records: &[StepRecord<F>], window: usize) -> Vec<f64> {
    let n = records.len();
    if n < window + 1 {
        return Vec::new();
    }
    let width = window + 1;
    let mut hits = records[..width].iter().filter(|r| r.covered_clean).count();
    let mut out = Vec::with_capacity(n - window);
    out.push(hits as f64 / width as f64);
    for i in width..n {
        hits += usize::from(records[i].covered_clean);
        hits -= usize::from(records[i - width].covered_clean);
        out.push(hits as f64 / width as f64);
    }
    out
}

/// `EmErr(T) = |(1 - Cov(T)) - alpha|`.
pub fn empirical_coverage_error<F>(records: &[StepRecord<F>], t: usize, alpha: f64) -> Result<f64> {
    Ok(((1.0 - long_run_coverage(records, t)?) - alpha).abs())
}

/// `ExErr(T) = |mean(miscover_prob) - alpha|` over the first `T` steps.
pub fn expected_coverage_error<F: Scalar>(
    records: &[StepRecord<F>],
    t: usize,
    alpha: f64,
) -> Result<f64> {
    check_prefix(records, t)?;
    let mut sum = 0.0;
    for r in &records[..t] {
        let p = r.miscover_prob.ok_or_else(|| {
            Error::UnsupportedStream(
                "expected coverage error needs exact conditional label probabilities".into(),
            )
        })?;
        sum += p.to_f64_lossy();
    }
    Ok((sum / t as f64 - alpha).abs())
}

pub fn average_set_size<F>(records: &[StepRecord<F>], t: usize) -> Result<f64> {
    check_prefix(records, t)?;
    Ok(records[..t].iter().map(|r| r.set_size as f64).sum::<f64>() / t as f64)
}

/// Regret of the played thresholds against the best fixed threshold in hindsight.
///
/// The cumulative loss `sum_t l_t(tau)` is a weighted sum of pinball losses
/// `sum_j w_j l(tau, s_j)`, piecewise linear with kinks at the scores. Its
/// slope is `-(1 - alpha) sum_j w_j < 0` left of every kink and
/// `alpha sum_j w_j > 0` right of them (the weights of a step sum to 1), so
/// the minimum sits on a kink and a sorted sweep finds it exactly.
#[derive(Debug, Clone)]
pub struct RegretTracker {
    alpha: f64,
    robust: bool,
    noisy_weight: f64,
    class_weight: f64,
    /// `(score, weight)` for every pinball term seen so far.
    kinks: Vec<(f64, f64)>,
    played_loss: f64,
    steps: usize,
}

impl RegretTracker {
    pub fn new<F: Scalar>(objective: &Objective<F>) -> Self {
        let p = &objective.params;
        Self {
            alpha: p.alpha.to_f64_lossy(),
            robust: objective.robust,
            noisy_weight: p.noisy_weight().to_f64_lossy(),
            class_weight: p.class_weight().to_f64_lossy(),
            kinks: Vec::new(),
            played_loss: 0.0,
            steps: 0,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Records the loss of `tau_played` on this step.
    pub fn observe<F: Scalar>(&mut self, tau_played: F, obs: &Observation<'_, F>) {
        let tau = tau_played.to_f64_lossy();
        let s_noisy = obs.s_noisy.to_f64_lossy();
        if self.robust {
            self.kinks.push((s_noisy, self.noisy_weight));
            for &s in obs.scores_all {
                self.kinks.push((s.to_f64_lossy(), -self.class_weight));
            }
        } else {
            self.kinks.push((s_noisy, 1.0));
        }
        self.played_loss += self.loss_at_step(tau, self.kinks.len() - self.terms_per_step(obs));
        self.steps += 1;
    }

    fn terms_per_step<F>(&self, obs: &Observation<'_, F>) -> usize {
        if self.robust {
            1 + obs.scores_all.len()
        } else {
            1
        }
    }

    fn loss_at_step(&self, tau: f64, from: usize) -> f64 {
        self.kinks[from..]
            .iter()
            .map(|&(s, w)| w * pinball_loss(tau, s, self.alpha))
            .sum()
    }

    /// `sum_t l_t(tau)` over all observed steps.
    pub fn cumulative_loss(&self, tau: f64) -> f64 {
        self.loss_at_step(tau, 0)
    }

    pub fn played_loss(&self) -> f64 {
        self.played_loss
    }

    /// `(argmin, min)` of the cumulative loss over all real thresholds.
    pub fn best_fixed(&self) -> Option<(f64, f64)> {
        if self.kinks.is_empty() {
            return None;
        }
        let mut kinks = self.kinks.clone();
        kinks.sort_by(|a, b| a.0.total_cmp(&b.0));
        let a = self.alpha;
        let total_w: f64 = kinks.iter().map(|k| k.1).sum();

        let first = kinks[0].0;
        let mut value = self.cumulative_loss(first);
        let (mut best_tau, mut best) = (first, value);
        // Weight of kinks at or left of the current point.
        let mut left_w = 0.0;
        let mut i = 0;
        while i < kinks.len() {
            let here = kinks[i].0;
            while i < kinks.len() && kinks[i].0 == here {
                left_w += kinks[i].1;
                i += 1;
            }
            if i == kinks.len() {
                break;
            }
            let next = kinks[i].0;
            let slope = left_w - (1.0 - a) * total_w;
            value += slope * (next - here);
            if value < best {
                best = value;
                best_tau = next;
            }
        }
        Some((best_tau, best))
    }

    /// `sum_t l_t(tau_t) - min_tau sum_t l_t(tau)`; zero before any step.
    pub fn regret(&self) -> f64 {
        self.best_fixed().map_or(0.0, |(_, best)| self.played_loss - best)
    }
}

/// Aggregated metrics and theory checks of one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub horizon: usize,
    pub alpha: f64,
    pub cov: f64,
    pub cov_gap: f64,
    pub avg_size: f64,
    pub em_err: f64,
    /// Absent for streams without exact conditional label laws.
    pub ex_err: Option<f64>,
    pub local_window: usize,
    /// Local coverage at starts `1, 1 + stride, 1 + 2 stride, ...`.
    pub local_cov: Vec<f64>,
    pub local_cov_stride: usize,
    pub local_cov_min: Option<f64>,
    pub local_cov_max: Option<f64>,
    pub regret: f64,
    pub theory_checks: BTreeMap<String, CheckVerdict>,
}

impl RunSummary {
    /// Number of local-coverage points kept in a summary.
    pub const LOCAL_COV_POINTS: usize = 1000;

    pub fn from_records<F: Scalar>(
        seed: u64,
        records: &[StepRecord<F>],
        alpha: f64,
        local_window: usize,
        regret: f64,
        theory_checks: BTreeMap<String, CheckVerdict>,
    ) -> Result<Self> {
        let t = records.len();
        let cov = long_run_coverage(records, t)?;
        let ex_err = match expected_coverage_error(records, t, alpha) {
            Ok(v) => Some(v),
            Err(Error::UnsupportedStream(_)) => None,
            Err(e) => return Err(e),
        };
        let series = local_coverage_series(records, local_window);
        let stride = series.len().div_ceil(Self::LOCAL_COV_POINTS).max(1);
        let fold = |init: f64, f: fn(f64, f64) -> f64| {
            (!series.is_empty()).then(|| series.iter().copied().fold(init, f))
        };
        Ok(Self {
            seed,
            horizon: t,
            alpha,
            cov,
            cov_gap: (cov - (1.0 - alpha)).abs(),
            avg_size: average_set_size(records, t)?,
            em_err: empirical_coverage_error(records, t, alpha)?,
            ex_err,
            local_window,
            local_cov_min: fold(f64::INFINITY, f64::min),
            local_cov_max: fold(f64::NEG_INFINITY, f64::max),
            local_cov: series.iter().step_by(stride).copied().collect(),
            local_cov_stride: stride,
            regret,
            theory_checks,
        })
    }
}
