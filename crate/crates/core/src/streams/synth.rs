//! Perfectly calibrated synthetic classifier.
//!
//! Each step draws a softmax vector from a symmetric Dirichlet and then the
//! label from that softmax, so `P(Y = y | probs) = probs[y]` exactly. Small
//! concentrations give sharp, accurate classifiers; large ones give
//! near-uniform outputs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use super::{sub_stream, SubStream};
use crate::error::{input_err, Result};
use crate::scalar::Scalar;
use crate::scores::ProbVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub num_classes: usize,
    /// Symmetric Dirichlet parameter.
    pub concentration: f64,
    pub horizon: usize,
    pub seed: u64,
    /// Step from which `shift_concentration` replaces `concentration`.
    pub shift_at: Option<usize>,
    pub shift_concentration: Option<f64>,
}

impl SynthConfig {
    pub fn new(num_classes: usize, concentration: f64, horizon: usize, seed: u64) -> Self {
        Self {
            num_classes,
            concentration,
            horizon,
            seed,
            shift_at: None,
            shift_concentration: None,
        }
    }

    /// Abrupt change of concentration at step `at` (1-based).
    pub fn with_shift(mut self, at: usize, concentration: f64) -> Self {
        self.shift_at = Some(at);
        self.shift_concentration = Some(concentration);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return input_err(format!("need at least 2 classes, got {}", self.num_classes));
        }
        if self.horizon < 1 {
            return input_err("horizon must be >= 1");
        }
        for c in std::iter::once(self.concentration).chain(self.shift_concentration) {
            if !(c.is_finite() && c > 0.0) {
                return input_err(format!("concentration must be > 0, got {c}"));
            }
        }
        match (self.shift_at, self.shift_concentration) {
            (Some(0), _) => input_err("shift_at must be >= 1"),
            (Some(_), None) | (None, Some(_)) => {
                input_err("shift_at and shift_concentration must be given together")
            }
            _ => Ok(()),
        }
    }

    /// Concentration in force at step `t` (1-based).
    pub fn concentration_at(&self, t: usize) -> f64 {
        match (self.shift_at, self.shift_concentration) {
            (Some(at), Some(c)) if t >= at => c,
            _ => self.concentration,
        }
    }
}

/// Iterator over `(probs, y_clean)` for steps `1..=horizon`.
#[derive(Debug, Clone)]
pub struct SynthStream {
    config: SynthConfig,
    t: usize,
    gamma: Gamma<f64>,
    gamma_shifted: Option<Gamma<f64>>,
    dirichlet_rng: ChaCha8Rng,
    label_rng: ChaCha8Rng,
}

impl SynthStream {
    pub fn new(config: SynthConfig) -> Result<Self> {
        config.validate()?;
        let gamma = |c: f64| {
            Gamma::new(c, 1.0).map_err(|e| crate::Error::Input(format!("concentration {c}: {e}")))
        };
        Ok(Self {
            gamma: gamma(config.concentration)?,
            gamma_shifted: config.shift_concentration.map(gamma).transpose()?,
            dirichlet_rng: sub_stream(config.seed, SubStream::Dirichlet),
            label_rng: sub_stream(config.seed, SubStream::Labels),
            config,
            t: 0,
        })
    }

    pub fn config(&self) -> &SynthConfig {
        &self.config
    }

    fn draw_probs(&mut self) -> Vec<f64> {
        let shifted = matches!(self.config.shift_at, Some(at) if self.t >= at);
        let gamma = match (&self.gamma_shifted, shifted) {
            (Some(g), true) => g,
            _ => &self.gamma,
        };
        loop {
            let mut v: Vec<f64> = (0..self.config.num_classes)
                .map(|_| gamma.sample(&mut self.dirichlet_rng))
                .collect();
            let sum: f64 = v.iter().sum();
            // All draws can underflow to zero for tiny concentrations.
            if sum > 0.0 && sum.is_finite() {
                v.iter_mut().for_each(|x| *x /= sum);
                return v;
            }
        }
    }

    /// Categorical draw by inverse CDF; the last class absorbs rounding.
    fn draw_label(&mut self, probs: &[f64]) -> usize {
        let r: f64 = self.label_rng.random();
        let mut acc = 0.0;
        for (y, &p) in probs.iter().enumerate() {
            acc += p;
            if r < acc {
                return y;
            }
        }
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
    }

    pub fn next_step<F: Scalar>(&mut self) -> Option<(ProbVector<F>, usize)> {
        if self.t >= self.config.horizon {
            return None;
        }
        self.t += 1;
        let probs = self.draw_probs();
        let label = self.draw_label(&probs);
        let pv = ProbVector::new(probs.into_iter().map(F::lit).collect())
            .expect("normalized Dirichlet draw is a valid probability vector");
        Some((pv, label))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(SynthConfig::new(1, 1.0, 10, 0).validate().is_err());
        assert!(SynthConfig::new(3, 0.0, 10, 0).validate().is_err());
        assert!(SynthConfig::new(3, 1.0, 0, 0).validate().is_err());
        assert!(SynthConfig::new(3, 1.0, 10, 0).with_shift(0, 2.0).validate().is_err());
        assert!(SynthConfig::new(3, 1.0, 10, 0).with_shift(5, 2.0).validate().is_ok());
    }

    #[test]
    fn deterministic_per_seed() {
        let run = |seed| {
            let mut s = SynthStream::new(SynthConfig::new(5, 0.3, 200, seed)).unwrap();
            std::iter::from_fn(|| s.next_step::<f64>())
                .map(|(p, y)| (p.into_vec(), y))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
        assert_eq!(run(9).len(), 200);
    }

    #[test]
    fn label_frequency_matches_mean_probability() {
        let n = 100_000;
        let mut s = SynthStream::new(SynthConfig::new(2, 1.0, n, 17)).unwrap();
        let (mut hits, mut mass) = (0usize, 0.0);
        while let Some((p, y)) = s.next_step::<f64>() {
            hits += usize::from(y == 0);
            mass += p.as_slice()[0];
        }
        let mean_p = mass / n as f64;
        let freq = hits as f64 / n as f64;
        let sd = (mean_p * (1.0 - mean_p) / n as f64).sqrt();
        assert!((freq - mean_p).abs() <= 3.0 * sd, "{freq} vs {mean_p}");
    }

    #[test]
    fn large_concentration_is_near_uniform() {
        let mut s = SynthStream::new(SynthConfig::new(4, 1e6, 50, 1)).unwrap();
        while let Some((p, _)) = s.next_step::<f64>() {
            assert!(p.as_slice().iter().all(|&q| (q - 0.25).abs() < 0.01));
        }
    }

    #[test]
    fn shift_changes_concentration() {
        let cfg = SynthConfig::new(10, 0.1, 4000, 3).with_shift(2001, 1e5);
        assert_eq!(cfg.concentration_at(2000), 0.1);
        assert_eq!(cfg.concentration_at(2001), 1e5);
        let mut s = SynthStream::new(cfg).unwrap();
        let maxes: Vec<f64> = std::iter::from_fn(|| s.next_step::<f64>())
            .map(|(p, _)| p.max_prob())
            .collect();
        let before = maxes[..2000].iter().sum::<f64>() / 2000.0;
        let after = maxes[2000..].iter().sum::<f64>() / 2000.0;
        assert!(before > 0.5 && after < 0.12, "{before} {after}");
    }

    #[test]
    fn tiny_concentration_stays_valid_in_f32() {
        let mut s = SynthStream::new(SynthConfig::new(8, 0.01, 500, 2)).unwrap();
        while let Some((p, y)) = s.next_step::<f32>() {
            assert!(y < 8);
            assert_eq!(p.num_classes(), 8);
        }
    }
}
