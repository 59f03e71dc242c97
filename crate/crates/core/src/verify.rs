//! Mechanical checks of the theory behind the robust updaters.
//!
//! Equality checks enumerate the noise channel exactly and use a `1e-12`
//! tolerance. Bound checks compare an observed quantity against a closed-form
//! right-hand side.

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};
use crate::losses::{pinball_grad, pinball_loss, robust_pinball_grad, robust_pinball_loss, LossParams};
use crate::noise::NoiseChannel;
use crate::scalar::Scalar;
use crate::scores::{ProbVector, ScoreParams};
use crate::updaters::{LearningRateSchedule, UpdaterKind};

/// Tolerance of the exact-enumeration identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

/// Rounding slack allowed when comparing a threshold with a lemma interval.
pub const BOUND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// `|observed - target| <= tolerance`.
    Equality,
    /// `observed <= bound + tolerance`.
    UpperBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckVerdict {
    pub name: String,
    pub kind: CheckKind,
    pub passed: bool,
    pub observed: f64,
    pub bound_or_target: f64,
    pub tolerance: f64,
}

impl CheckVerdict {
    pub fn equality(name: impl Into<String>, observed: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            kind: CheckKind::Equality,
            passed: (observed - target).abs() <= tolerance,
            observed,
            bound_or_target: target,
            tolerance,
        }
    }

    pub fn upper_bound(name: impl Into<String>, observed: f64, bound: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            kind: CheckKind::UpperBound,
            passed: observed <= bound + tolerance,
            observed,
            bound_or_target: bound,
            tolerance,
        }
    }
}

impl std::fmt::Display for CheckVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rel = match self.kind {
            CheckKind::Equality => "==",
            CheckKind::UpperBound => "<=",
        };
        write!(
            f,
            "{} {}: observed {:.6e} {rel} {:.6e} (tol {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.observed,
            self.bound_or_target,
            self.tolerance
        )
    }
}

/// Checks that the channel-averaged robust gradient and loss equal the clean ones.
///
/// `observed` is the larger of the gradient and loss deviations.
pub fn check_unbiasedness<F: Scalar>(
    probs: &ProbVector<F>,
    y_clean: usize,
    tau: F,
    u: F,
    score_params: &ScoreParams<F>,
    loss_params: &LossParams<F>,
) -> Result<CheckVerdict> {
    let scores = score_params.score_all_bounded(probs, u)?;
    let channel = NoiseChannel::exact(loss_params.epsilon, loss_params.num_classes)?;
    let law = channel.noisy_label_distribution(y_clean)?;
    let (mut grad_avg, mut loss_avg) = (F::zero(), F::zero());
    for (y_noisy, &w) in law.as_slice().iter().enumerate() {
        let s = scores[y_noisy];
        grad_avg = grad_avg + w * robust_pinball_grad(tau, s, &scores, loss_params)?;
        loss_avg = loss_avg + w * robust_pinball_loss(tau, s, &scores, loss_params)?;
    }
    let alpha = loss_params.alpha;
    let grad_dev = (grad_avg - pinball_grad(tau, scores[y_clean], alpha)).abs();
    let loss_dev = (loss_avg - pinball_loss(tau, scores[y_clean], alpha)).abs();
    Ok(CheckVerdict::equality(
        "unbiasedness",
        grad_dev.max(loss_dev).to_f64_lossy(),
        0.0,
        IDENTITY_TOLERANCE,
    ))
}

/// Checks `P{S <= s} = P{S~ <= s} / (1 - eps) - eps / (K (1 - eps)) sum_y 1{S_y <= s}`
/// on every grid point, conditionally on one example.
pub fn check_distribution_identity<F: Scalar>(
    probs: &ProbVector<F>,
    y_clean: usize,
    threshold_grid: &[F],
    u: F,
    score_params: &ScoreParams<F>,
    epsilon: F,
) -> Result<CheckVerdict> {
    let k = probs.num_classes();
    let scores = score_params.score_all_bounded(probs, u)?;
    let channel = NoiseChannel::exact(epsilon, k)?;
    let law = channel.noisy_label_distribution(y_clean)?;
    let params = LossParams::new(F::lit(0.5), epsilon, k)?;
    let ind = |cond: bool| if cond { F::one() } else { F::zero() };

    let mut max_dev = F::zero();
    for &s in threshold_grid {
        let clean = ind(scores[y_clean] <= s);
        let noisy = law
            .as_slice()
            .iter()
            .zip(&scores)
            .fold(F::zero(), |acc, (&w, &sc)| acc + w * ind(sc <= s));
        let all = scores.iter().fold(F::zero(), |acc, &sc| acc + ind(sc <= s));
        let rhs = params.noisy_weight() * noisy - params.class_weight() * all;
        max_dev = max_dev.max((rhs - clean).abs());
    }
    Ok(CheckVerdict::equality(
        "distribution_identity",
        max_dev.to_f64_lossy(),
        0.0,
        IDENTITY_TOLERANCE,
    ))
}

/// Interval that every threshold of a (noise-robust) ACI run started in `[0, 1]` stays in:
/// `[-eta_max (alpha + e/(1-e)), 1 + eta_max (1/(1-e) - alpha)]`, where `e` is the rate
/// the robust loss uses (zero for the baseline) and `eta_max` the largest step size.
///
/// With `e = 0` and constant `eta` this is `[-alpha eta, 1 + (1 - alpha) eta]`.
pub fn threshold_interval(
    robust: bool,
    schedule: &LearningRateSchedule<f64>,
    alpha: f64,
    epsilon: f64,
    horizon: usize,
) -> (f64, f64) {
    let eta = schedule.max_eta(horizon.max(1));
    let e = if robust { epsilon } else { 0.0 };
    let slack = e / (1.0 - e);
    (-eta * (alpha + slack), 1.0 + eta * (1.0 / (1.0 - e) - alpha))
}

/// Checks a threshold trajectory against [`threshold_interval`].
///
/// `observed` is the largest distance outside the interval (zero when inside).
/// Only ACI-type updaters have a threshold lemma.
pub fn check_threshold_bounds(
    trajectory: &[f64],
    updater: UpdaterKind,
    schedule: &LearningRateSchedule<f64>,
    alpha: f64,
    epsilon: f64,
) -> Result<CheckVerdict> {
    if !updater.is_aci() {
        return input_err(format!("no threshold-bound lemma for updater '{updater}'"));
    }
    let (lo, hi) = threshold_interval(updater.is_robust(), schedule, alpha, epsilon, trajectory.len());
    let excess = trajectory
        .iter()
        .map(|&tau| (lo - tau).max(tau - hi).max(0.0))
        .fold(0.0, f64::max);
    Ok(CheckVerdict::upper_bound("threshold_bounds", excess, 0.0, BOUND_SLACK))
}

/// Coverage gap a baseline run is expected to show:
/// `(eps / (1 - eps)) * mean((1 - alpha) - |C_t| / K)`.
pub fn predicted_coverage_gap(set_sizes: &[usize], num_classes: usize, alpha: f64, epsilon: f64) -> f64 {
    if set_sizes.is_empty() {
        return 0.0;
    }
    let k = num_classes as f64;
    let mean = set_sizes
        .iter()
        .map(|&s| (1.0 - alpha) - s as f64 / k)
        .sum::<f64>()
        / set_sizes.len() as f64;
    epsilon / (1.0 - epsilon) * mean
}

/// `(1 + eps) / (1 - eps)`, the bound on the robust gradient's magnitude.
fn grad_bound(epsilon: f64) -> f64 {
    (1.0 + epsilon) / (1.0 - epsilon)
}

/// Regret bound after `T` steps of (noise-robust) ACI:
/// `(1 + max_{t<T} eta_t c)^2 / (2 eta_T) + c^2 sum_{t<=T} eta_t / 2`, `c = (1+eps)/(1-eps)`.
pub fn regret_bound(schedule: &LearningRateSchedule<f64>, epsilon: f64, horizon: usize) -> f64 {
    if horizon == 0 {
        return 0.0;
    }
    let c = grad_bound(epsilon);
    let max_eta = (1..horizon).map(|t| schedule.eta(t)).fold(0.0, f64::max);
    let sum_eta: f64 = (1..=horizon).map(|t| schedule.eta(t)).sum();
    (1.0 + max_eta * c).powi(2) / (2.0 * schedule.eta(horizon)) + c * c * sum_eta / 2.0
}

/// Closed form for a constant rate: `(1 + eta c)^2 / eta + c^2 T eta / 2`.
///
/// Never below [`regret_bound`] for the same constant schedule.
pub fn constant_rate_regret_bound(eta: f64, epsilon: f64, horizon: usize) -> f64 {
    let c = grad_bound(epsilon);
    (1.0 + eta * c).powi(2) / eta + c * c * horizon as f64 * eta / 2.0
}

/// Decaying schedule `eta_t = ((1 - eps)/(1 + eps) + eta0) / sqrt(t)`.
pub fn sqrt_decay_schedule(epsilon: f64, eta0: f64) -> LearningRateSchedule<f64> {
    LearningRateSchedule::Decaying {
        base: (1.0 - epsilon) / (1.0 + epsilon) + eta0,
        exponent: 0.5,
    }
}

/// Least-squares slope of `ln(err)` against `ln(T)`.
pub fn rate_fit(series: &[(usize, f64)]) -> Result<f64> {
    if series.len() < 3 {
        return input_err(format!("rate fit needs at least 3 points, got {}", series.len()));
    }
    if let Some(&(t, e)) = series.iter().find(|&&(t, e)| t == 0 || !(e > 0.0 && e.is_finite())) {
        return input_err(format!("rate fit needs T >= 1 and finite err > 0, got ({t}, {e})"));
    }
    let pts: Vec<(f64, f64)> = series.iter().map(|&(t, e)| ((t as f64).ln(), e.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return input_err("rate fit needs at least two distinct T");
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scores::ScoreKind;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unbiasedness_examples() {
        let p = ProbVector::new(vec![0.5, 0.2, 0.15, 0.1, 0.05]).unwrap();
        for kind in [ScoreKind::Lac, ScoreKind::Aps, ScoreKind::Raps, ScoreKind::Saps] {
            let sp = ScoreParams::new(kind);
            for eps in [0.0, 0.3] {
                let lp = LossParams::new(0.1, eps, 5).unwrap();
                for tau in [-0.05, 0.3, 0.62, 0.95] {
                    let v = check_unbiasedness(&p, 2, tau, 0.37, &sp, &lp).unwrap();
                    assert!(v.passed, "{kind} eps={eps} tau={tau}: {v}");
                }
            }
        }
    }

    #[test]
    fn distribution_identity_examples() {
        let p = ProbVector::new(vec![0.6, 0.3, 0.1]).unwrap();
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        for eps in [0.0, 0.2] {
            let v = check_distribution_identity(&p, 1, &grid, 0.5, &ScoreParams::new(ScoreKind::Aps), eps)
                .unwrap();
            assert!(v.passed, "{v}");
        }
        let below = check_distribution_identity(&p, 0, &[-1.0], 0.5, &ScoreParams::new(ScoreKind::Lac), 0.2)
            .unwrap();
        assert_eq!(below.observed, 0.0);
    }

    #[test]
    fn threshold_interval_examples() {
        let c = LearningRateSchedule::Constant(0.05);
        let (lo, hi) = threshold_interval(false, &c, 0.1, 0.3, 100);
        assert_abs_diff_eq!(lo, -0.005, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 1.045, epsilon = 1e-15);
        let (lo, hi) = threshold_interval(true, &c, 0.1, 0.2, 100);
        assert_abs_diff_eq!(lo, -0.005 - 0.0125, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 1.0 - 0.005 + 0.0625, epsilon = 1e-15);
        let d = LearningRateSchedule::Decaying { base: 1.0, exponent: 0.6 };
        let (lo, hi) = threshold_interval(true, &d, 0.1, 0.2, 100);
        assert_abs_diff_eq!(lo, -(0.1 + 0.25), epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 1.0 + 1.25 - 0.1, epsilon = 1e-15);
    }

    #[test]
    fn threshold_check_verdicts() {
        let c = LearningRateSchedule::Constant(0.05);
        assert!(check_threshold_bounds(&[], UpdaterKind::NrAci, &c, 0.1, 0.1).unwrap().passed);
        assert!(check_threshold_bounds(&[0.0, 1.04], UpdaterKind::Aci, &c, 0.1, 0.0).unwrap().passed);
        let v = check_threshold_bounds(&[0.5, 1.1], UpdaterKind::Aci, &c, 0.1, 0.0).unwrap();
        assert!(!v.passed);
        assert_abs_diff_eq!(v.observed, 0.055, epsilon = 1e-12);
        assert!(check_threshold_bounds(&[0.5], UpdaterKind::Saocp, &c, 0.1, 0.0).is_err());
    }

    #[test]
    fn predicted_gap_examples() {
        assert_eq!(predicted_coverage_gap(&[3; 10], 10, 0.1, 0.0), 0.0);
        assert_abs_diff_eq!(predicted_coverage_gap(&[10; 7], 100, 0.1, 0.1), 0.8 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(predicted_coverage_gap(&[90; 5], 100, 0.1, 0.3), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn regret_bounds() {
        let eta = 0.05;
        let c = LearningRateSchedule::Constant(eta);
        for eps in [0.0, 0.2] {
            let prop = regret_bound(&c, eps, 10_000);
            let k = (1.0 + eps) / (1.0 - eps);
            let direct = (1.0 + eta * k).powi(2) / (2.0 * eta) + k * k * 10_000.0 * eta / 2.0;
            assert_abs_diff_eq!(prop, direct, epsilon = 1e-9);
            assert!(constant_rate_regret_bound(eta, eps, 10_000) >= prop);
        }
        assert_eq!(regret_bound(&c, 0.1, 0), 0.0);
        // With T = 1 the max over t < T is empty.
        assert_abs_diff_eq!(regret_bound(&c, 0.0, 1), 1.0 / 0.1 + 0.025, epsilon = 1e-12);
    }

    #[test]
    fn sqrt_decay_bound_grows_like_sqrt_t() {
        let s = sqrt_decay_schedule(0.0, 0.0);
        let r = |t| regret_bound(&s, 0.0, t);
        let ratio = r(2_000_000) / r(1_000_000);
        assert!((ratio - 2f64.sqrt()).abs() < 1e-3, "{ratio}");
    }

    #[test]
    fn rate_fit_examples() {
        let ts = [1000usize, 2000, 4000, 8000, 16000];
        let half: Vec<_> = ts.iter().map(|&t| (t, 3.0 / (t as f64).sqrt())).collect();
        assert_abs_diff_eq!(rate_fit(&half).unwrap(), -0.5, epsilon = 1e-12);
        let one: Vec<_> = ts.iter().map(|&t| (t, 2.0 / t as f64)).collect();
        assert_abs_diff_eq!(rate_fit(&one).unwrap(), -1.0, epsilon = 1e-12);
        assert!(rate_fit(&half[..2]).is_err());
        assert!(rate_fit(&[(1, 1.0), (2, 0.0), (4, 1.0)]).is_err());
    }
}
