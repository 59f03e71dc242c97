//! Pinball loss, its noise-robust correction, and their subgradients in the threshold.
//!
//! The robust loss re-weights the pinball loss of the observed (noisy) score
//! by `1 / (1 - eps)` and subtracts `eps / (K (1 - eps))` times the pinball
//! losses of every class score:
//!
//! ```text
//! l~(tau) = l(tau, s~) / (1 - eps) - eps / (K (1 - eps)) * sum_y l(tau, s_y)
//! ```
//!
//! Under uniform label noise its conditional expectation over the observed
//! label equals the clean pinball loss, and the same holds for the gradient.
//! Subgradients use the right-continuous convention `1{s <= tau}`, so a score
//! equal to the threshold counts as covered.

use crate::error::{input_err, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParams<F> {
    /// Target miscoverage rate.
    pub alpha: F,
    /// Noise rate assumed by the robust loss.
    pub epsilon: F,
    pub num_classes: usize,
}

impl<F: Scalar> LossParams<F> {
    pub fn new(alpha: F, epsilon: F, num_classes: usize) -> Result<Self> {
        if !(alpha > F::zero() && alpha < F::one()) {
            return input_err(format!("alpha must lie in (0, 1), got {alpha}"));
        }
        if !(epsilon >= F::zero() && epsilon < F::one()) {
            return input_err(format!("epsilon must lie in [0, 1), got {epsilon}"));
        }
        if num_classes < 2 {
            return input_err(format!("need at least 2 classes, got {num_classes}"));
        }
        Ok(Self {
            alpha,
            epsilon,
            num_classes,
        })
    }

    /// Weight `1 / (1 - eps)` on the noisy-score term.
    #[inline]
    pub fn noisy_weight(&self) -> F {
        F::one() / (F::one() - self.epsilon)
    }

    /// Weight `eps / (K (1 - eps))` on each class-score term.
    #[inline]
    pub fn class_weight(&self) -> F {
        self.epsilon / (F::from_count(self.num_classes) * (F::one() - self.epsilon))
    }

    /// Bounds `[alpha - 1 - eps/(1-eps), alpha + eps/(1-eps)]` on the robust gradient.
    pub fn robust_grad_bounds(&self) -> (F, F) {
        let slack = self.epsilon / (F::one() - self.epsilon);
        (self.alpha - F::one() - slack, self.alpha + slack)
    }
}

/// `alpha (tau - s) 1{tau >= s} + (1 - alpha)(s - tau) 1{tau <= s}`.
#[inline]
pub fn pinball_loss<F: Scalar>(tau: F, s: F, alpha: F) -> F {
    if tau >= s {
        alpha * (tau - s)
    } else {
        (F::one() - alpha) * (s - tau)
    }
}

/// `1{s <= tau} - (1 - alpha)`.
#[inline]
pub fn pinball_grad<F: Scalar>(tau: F, s: F, alpha: F) -> F {
    let covered = if s <= tau { F::one() } else { F::zero() };
    covered - (F::one() - alpha)
}

fn check_scores<F: Scalar>(scores_all: &[F], params: &LossParams<F>) -> Result<()> {
    if scores_all.len() != params.num_classes {
        return input_err(format!(
            "expected {} class scores, got {}",
            params.num_classes,
            scores_all.len()
        ));
    }
    Ok(())
}

pub fn robust_pinball_loss<F: Scalar>(
    tau: F,
    s_noisy: F,
    scores_all: &[F],
    params: &LossParams<F>,
) -> Result<F> {
    check_scores(scores_all, params)?;
    Ok(robust_loss_unchecked(tau, s_noisy, scores_all, params))
}

pub fn robust_pinball_grad<F: Scalar>(
    tau: F,
    s_noisy: F,
    scores_all: &[F],
    params: &LossParams<F>,
) -> Result<F> {
    check_scores(scores_all, params)?;
    Ok(robust_grad_unchecked(tau, s_noisy, scores_all, params))
}

#[inline]
pub(crate) fn robust_loss_unchecked<F: Scalar>(
    tau: F,
    s_noisy: F,
    scores_all: &[F],
    params: &LossParams<F>,
) -> F {
    let alpha = params.alpha;
    let class_sum = scores_all
        .iter()
        .fold(F::zero(), |acc, &s| acc + pinball_loss(tau, s, alpha));
    params.noisy_weight() * pinball_loss(tau, s_noisy, alpha) - params.class_weight() * class_sum
}

#[inline]
pub(crate) fn robust_grad_unchecked<F: Scalar>(
    tau: F,
    s_noisy: F,
    scores_all: &[F],
    params: &LossParams<F>,
) -> F {
    let alpha = params.alpha;
    let class_sum = scores_all
        .iter()
        .fold(F::zero(), |acc, &s| acc + pinball_grad(tau, s, alpha));
    params.noisy_weight() * pinball_grad(tau, s_noisy, alpha) - params.class_weight() * class_sum
}

/// Which loss an updater descends: plain pinball on the noisy score, or the robust loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective<F> {
    pub params: LossParams<F>,
    pub robust: bool,
}

impl<F: Scalar> Objective<F> {
    pub fn pinball(params: LossParams<F>) -> Self {
        Self {
            params,
            robust: false,
        }
    }

    pub fn robust(params: LossParams<F>) -> Self {
        Self {
            params,
            robust: true,
        }
    }

    #[inline]
    pub fn loss(&self, tau: F, obs: &Observation<'_, F>) -> F {
        if self.robust {
            robust_loss_unchecked(tau, obs.s_noisy, obs.scores_all, &self.params)
        } else {
            pinball_loss(tau, obs.s_noisy, self.params.alpha)
        }
    }

    #[inline]
    pub fn grad(&self, tau: F, obs: &Observation<'_, F>) -> F {
        if self.robust {
            robust_grad_unchecked(tau, obs.s_noisy, obs.scores_all, &self.params)
        } else {
            pinball_grad(tau, obs.s_noisy, self.params.alpha)
        }
    }
}

/// What an updater sees after predicting: the observed score and all class scores.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a, F> {
    pub s_noisy: F,
    pub scores_all: &'a [F],
}
