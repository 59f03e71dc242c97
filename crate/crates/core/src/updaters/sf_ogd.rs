//! Scale-free online gradient descent.
//!
//! `tau <- tau - eta * g_t / sqrt(sum_{i<=t} g_i^2)`. The step size adapts to
//! the observed gradient magnitudes, so no learning-rate tuning is needed.

use crate::losses::{Objective, Observation};
use crate::scalar::Scalar;

/// Default scale used by the expert threshold learners.
pub fn default_sf_eta<F: Scalar>() -> F {
    F::one() / F::lit(3.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfOgdState<F> {
    pub tau: F,
    pub eta: F,
    /// Cumulative squared gradients; nondecreasing.
    pub grad_sq_sum: F,
}

impl<F: Scalar> SfOgdState<F> {
    pub fn new(tau: F, eta: F) -> Self {
        Self {
            tau,
            eta,
            grad_sq_sum: F::zero(),
        }
    }

    /// A zero cumulative norm means no move.
    #[inline]
    pub fn step(&mut self, grad: F) {
        self.grad_sq_sum = self.grad_sq_sum + grad * grad;
        if self.grad_sq_sum > F::zero() {
            self.tau = self.tau - self.eta * grad / self.grad_sq_sum.sqrt();
        }
    }
}

/// SF-OGD driven by a pinball or robust pinball objective.
#[derive(Debug, Clone)]
pub struct SfOgd<F> {
    state: SfOgdState<F>,
    objective: Objective<F>,
}

impl<F: Scalar> SfOgd<F> {
    pub fn new(tau1: F, eta: F, objective: Objective<F>) -> Self {
        Self {
            state: SfOgdState::new(tau1, eta),
            objective,
        }
    }

    pub fn state(&self) -> &SfOgdState<F> {
        &self.state
    }

    pub fn objective(&self) -> &Objective<F> {
        &self.objective
    }

    pub fn step(&mut self, obs: &Observation<'_, F>) -> F {
        let grad = self.objective.grad(self.state.tau, obs);
        self.state.step(grad);
        grad
    }
}
