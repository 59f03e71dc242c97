//! Adaptive conformal inference: online (sub)gradient descent on the threshold.
//!
//! `tau_{t+1} = tau_t - eta_t * grad`, where `grad` is the pinball gradient of
//! the observed score (baseline) or the robust pinball gradient (noise-robust
//! variant). With a constant rate and pinball loss this is the classic
//! `tau_{t+1} = tau_t + eta (1{miss} - alpha)`.

use super::LearningRateSchedule;
use crate::losses::{Objective, Observation};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct Aci<F> {
    tau: F,
    t: usize,
    schedule: LearningRateSchedule<F>,
    objective: Objective<F>,
}

impl<F: Scalar> Aci<F> {
    pub fn new(tau1: F, schedule: LearningRateSchedule<F>, objective: Objective<F>) -> Self {
        Self {
            tau: tau1,
            t: 1,
            schedule,
            objective,
        }
    }

    #[inline]
    pub fn tau(&self) -> F {
        self.tau
    }

    /// Index of the step about to be taken.
    #[inline]
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn schedule(&self) -> &LearningRateSchedule<F> {
        &self.schedule
    }

    pub fn objective(&self) -> &Objective<F> {
        &self.objective
    }

    /// One update; returns the gradient that was applied.
    pub fn step(&mut self, obs: &Observation<'_, F>) -> F {
        let eta = self.schedule.eta(self.t);
        let grad = self.objective.grad(self.tau, obs);
        self.tau = self.tau - eta * grad;
        self.t += 1;
        grad
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LossParams;
    use approx::assert_abs_diff_eq;

    fn obs(s: f64, all: &[f64]) -> Observation<'_, f64> {
        Observation { s_noisy: s, scores_all: all }
    }

    #[test]
    fn miscover_and_cover_steps() {
        let params = LossParams::new(0.1, 0.0, 3).unwrap();
        let all = [0.2, 0.6, 0.9];
        let mut aci = Aci::new(0.5, LearningRateSchedule::Constant(0.05), Objective::pinball(params));
        aci.step(&obs(0.6, &all));
        assert_abs_diff_eq!(aci.tau(), 0.545, epsilon = 1e-15);
        let mut aci = Aci::new(0.5, LearningRateSchedule::Constant(0.05), Objective::pinball(params));
        aci.step(&obs(0.2, &all));
        assert_abs_diff_eq!(aci.tau(), 0.495, epsilon = 1e-15);
        assert_eq!(aci.t(), 2);
    }

    #[test]
    fn robust_with_zero_noise_matches_baseline() {
        let params = LossParams::new(0.1, 0.0, 3).unwrap();
        let sched = LearningRateSchedule::Decaying { base: 1.0, exponent: 0.6 };
        let mut a = Aci::new(0.9, sched, Objective::pinball(params));
        let mut b = Aci::new(0.9, sched, Objective::robust(params));
        let stream = [[0.1, 0.5, 0.95], [0.3, 0.2, 0.99], [0.05, 0.7, 0.8]];
        for (i, all) in stream.iter().cycle().take(300).enumerate() {
            let o = obs(all[i % 3], all);
            assert_eq!(a.step(&o).to_bits(), b.step(&o).to_bits());
            assert_eq!(a.tau().to_bits(), b.tau().to_bits());
        }
    }

    #[test]
    fn telescoping_identity_constant_rate() {
        let params = LossParams::new(0.1, 0.2, 3).unwrap();
        let eta = 0.05;
        let mut aci = Aci::new(0.7, LearningRateSchedule::Constant(eta), Objective::robust(params));
        let stream = [[0.1, 0.5, 0.95], [0.3, 0.2, 0.99], [0.05, 0.7, 0.8], [0.6, 0.6, 0.1]];
        let mut grad_sum = 0.0;
        for (i, all) in stream.iter().cycle().take(1000).enumerate() {
            grad_sum += aci.step(&obs(all[(i * 7) % 3], all));
        }
        assert_abs_diff_eq!(grad_sum, (0.7 - aci.tau()) / eta, epsilon = 1e-9);
    }
}
