//! Strongly adaptive online conformal prediction.
//!
//! A meta-learner over SF-OGD experts with finite lifetimes. The expert
//! spawned at step `t` lives for `L(t) = g * 2^nu(t)` steps, where `nu(t)` is
//! the 2-adic valuation of `t`, so at most about `g * log2(t)` experts are
//! alive at once. Experts are combined with coin-betting weights:
//!
//! * prior `pi_i ∝ i^-2 (1 + [w_i]_+)` over active experts,
//! * `p_i ∝ pi_i [w_i]_+`, falling back to `pi` when every bet is non-positive,
//! * coin outcome `g_i = l(tau_agg) - l(tau_i)`, clipped at zero while `w_i <= 0`,
//! * bet `w_i = mean(g_i) * (1 + sum_j w_ij g_ij)`.
//!
//! Each step, the state already holds the experts and weights for the step
//! about to be predicted, so [`Saocp::tau`] is the threshold to use.

use super::sf_ogd::SfOgdState;
use crate::losses::{Objective, Observation};
use crate::scalar::{positive_part, Scalar};

/// Expert lifetime `g * 2^nu(t)`; odd `t` gets `g`.
#[inline]
pub fn lifetime(t: usize, g: usize) -> usize {
    assert!(t >= 1, "lifetime is defined for t >= 1");
    g << t.trailing_zeros()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expert<F> {
    pub start: usize,
    pub lifetime: usize,
    pub sf_ogd: SfOgdState<F>,
    /// Current coin-betting weight.
    pub w: F,
    pub sum_g: F,
    pub sum_wg: F,
}

impl<F: Scalar> Expert<F> {
    /// Active on `[start, start + lifetime - 1]`.
    #[inline]
    pub fn is_active(&self, t: usize) -> bool {
        self.start <= t && t < self.start + self.lifetime
    }
}

#[derive(Debug, Clone)]
pub struct Saocp<F> {
    g: usize,
    sf_eta: F,
    objective: Objective<F>,
    /// Step about to be predicted.
    t: usize,
    experts: Vec<Expert<F>>,
    /// Aggregation weights of `experts` for step `t`.
    weights: Vec<F>,
    tau: F,
}

impl<F: Scalar> Saocp<F> {
    pub fn new(tau1: F, lifetime_multiplier: usize, sf_eta: F, objective: Objective<F>) -> Self {
        assert!(lifetime_multiplier >= 1, "lifetime multiplier must be >= 1");
        let mut s = Self {
            g: lifetime_multiplier,
            sf_eta,
            objective,
            t: 1,
            experts: Vec::new(),
            weights: Vec::new(),
            tau: tau1,
        };
        s.begin_step(tau1);
        s
    }

    /// Aggregated threshold for the current step.
    #[inline]
    pub fn tau(&self) -> F {
        self.tau
    }

    #[inline]
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn experts(&self) -> &[Expert<F>] {
        &self.experts
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn objective(&self) -> &Objective<F> {
        &self.objective
    }

    pub fn lifetime_multiplier(&self) -> usize {
        self.g
    }

    /// Spawns expert `t` at `init_tau`, drops expired experts and recomputes
    /// the aggregate threshold.
    fn begin_step(&mut self, init_tau: F) {
        let t = self.t;
        self.experts.retain(|e| e.is_active(t));
        self.experts.push(Expert {
            start: t,
            lifetime: lifetime(t, self.g),
            sf_ogd: SfOgdState::new(init_tau, self.sf_eta),
            w: F::zero(),
            sum_g: F::zero(),
            sum_wg: F::zero(),
        });

        let prior: Vec<F> = self
            .experts
            .iter()
            .map(|e| {
                let i = F::from_count(e.start);
                (F::one() + positive_part(e.w)) / (i * i)
            })
            .collect();
        let prior_sum = prior.iter().fold(F::zero(), |a, &b| a + b);
        let bets: Vec<F> = prior
            .iter()
            .zip(&self.experts)
            .map(|(&pi, e)| pi * positive_part(e.w))
            .collect();
        let bet_sum = bets.iter().fold(F::zero(), |a, &b| a + b);

        self.weights = if bet_sum > F::zero() {
            bets.into_iter().map(|b| b / bet_sum).collect()
        } else {
            prior.into_iter().map(|p| p / prior_sum).collect()
        };
        self.tau = self
            .experts
            .iter()
            .zip(&self.weights)
            .fold(F::zero(), |acc, (e, &p)| acc + p * e.sf_ogd.tau);
    }

    /// Consumes the observation for the current step and prepares the next one.
    /// Returns the objective's gradient at the aggregated threshold.
    pub fn step(&mut self, obs: &Observation<'_, F>) -> F {
        let t = self.t;
        let tau_used = self.tau;
        let loss_used = self.objective.loss(tau_used, obs);
        let objective = self.objective;

        for e in &mut self.experts {
            let tau_i = e.sf_ogd.tau;
            let diff = loss_used - objective.loss(tau_i, obs);
            let g = if e.w > F::zero() { diff } else { positive_part(diff) };

            let grad_i = objective.grad(tau_i, obs);
            e.sf_ogd.step(grad_i);

            e.sum_g = e.sum_g + g;
            e.sum_wg = e.sum_wg + e.w * g;
            let age = F::from_count(t - e.start + 1);
            e.w = e.sum_g / age * (F::one() + e.sum_wg);
        }

        let grad_used = objective.grad(tau_used, obs);
        self.t += 1;
        self.begin_step(tau_used);
        grad_used
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LossParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lifetime_examples() {
        assert_eq!(lifetime(4, 1), 4);
        assert_eq!(lifetime(6, 1), 2);
        assert_eq!(lifetime(1, 2), 2);
        assert_eq!(lifetime(7, 3), 3);
        assert_eq!(lifetime(48, 1), 16);
    }

    fn random_obs(rng: &mut ChaCha8Rng, k: usize) -> (usize, Vec<f64>) {
        let scores: Vec<f64> = (0..k).map(|_| rng.random()).collect();
        (rng.random_range(0..k), scores)
    }

    #[test]
    fn first_step_is_single_expert_identity() {
        let params = LossParams::new(0.1, 0.1, 4).unwrap();
        let s = Saocp::new(0.9, 8, 1.0 / 3f64.sqrt(), Objective::robust(params));
        assert_eq!(s.experts().len(), 1);
        assert_eq!(s.weights(), &[1.0]);
        assert_eq!(s.tau(), 0.9);
    }

    #[test]
    fn weights_and_active_set_invariants() {
        let k = 5;
        let params = LossParams::new(0.1, 0.2, k).unwrap();
        for g in [1usize, 2, 8] {
            let mut s = Saocp::new(0.9, g, 1.0 / 3f64.sqrt(), Objective::robust(params));
            let mut rng = ChaCha8Rng::seed_from_u64(g as u64);
            for _ in 0..3000 {
                let t = s.t();
                let bound = g * (t as f64).log2().ceil() as usize + 1;
                assert!(s.experts().len() <= bound, "t={t}: {} > {bound}", s.experts().len());
                assert!(s.experts().iter().all(|e| e.is_active(t)));
                let sum: f64 = s.weights().iter().sum();
                assert!((sum - 1.0).abs() <= 1e-9);
                let lo = s.experts().iter().map(|e| e.sf_ogd.tau).fold(f64::INFINITY, f64::min);
                let hi = s.experts().iter().map(|e| e.sf_ogd.tau).fold(f64::NEG_INFINITY, f64::max);
                assert!(s.tau() >= lo - 1e-12 && s.tau() <= hi + 1e-12);

                let (noisy, scores) = random_obs(&mut rng, k);
                s.step(&Observation { s_noisy: scores[noisy], scores_all: &scores });
            }
        }
    }

    #[test]
    fn zero_noise_robust_matches_baseline() {
        let k = 4;
        let params = LossParams::new(0.1, 0.0, k).unwrap();
        let mut a = Saocp::new(0.9, 4, 1.0 / 3f64.sqrt(), Objective::pinball(params));
        let mut b = Saocp::new(0.9, 4, 1.0 / 3f64.sqrt(), Objective::robust(params));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let (noisy, scores) = random_obs(&mut rng, k);
            let o = Observation { s_noisy: scores[noisy], scores_all: &scores };
            assert_eq!(a.step(&o).to_bits(), b.step(&o).to_bits());
            assert_eq!(a.tau().to_bits(), b.tau().to_bits());
        }
    }

    #[test]
    fn new_expert_starts_at_previous_aggregate() {
        let params = LossParams::new(0.1, 0.0, 3).unwrap();
        let mut s = Saocp::new(0.5, 2, 1.0 / 3f64.sqrt(), Objective::pinball(params));
        let scores = [0.1, 0.8, 0.95];
        let before = s.tau();
        s.step(&Observation { s_noisy: 0.95, scores_all: &scores });
        let newest = s.experts().last().unwrap();
        assert_eq!(newest.start, 2);
        assert_eq!(newest.sf_ogd.tau, before);
    }
}
