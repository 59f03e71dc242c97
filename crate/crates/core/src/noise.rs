//! Uniform label-noise channel.
//!
//! With probability `epsilon_true` the observed label is replaced by a draw
//! that is uniform over all `K` classes, so a corrupted label can coincide
//! with the clean one. `epsilon_used` is the rate handed to the robust loss
//! and may differ from the true rate when the noise level is misestimated.

use rand::Rng;

use crate::error::{input_err, Result};
use crate::scalar::Scalar;
use crate::scores::ProbVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseChannel<F> {
    pub epsilon_true: F,
    pub epsilon_used: F,
    pub num_classes: usize,
}

impl<F: Scalar> NoiseChannel<F> {
    pub fn new(epsilon_true: F, epsilon_used: F, num_classes: usize) -> Result<Self> {
        for (name, e) in [("epsilon_true", epsilon_true), ("epsilon_used", epsilon_used)] {
            if !(e >= F::zero() && e < F::one()) {
                return input_err(format!("{name} must lie in [0, 1), got {e}"));
            }
        }
        if num_classes < 2 {
            return input_err(format!("need at least 2 classes, got {num_classes}"));
        }
        Ok(Self {
            epsilon_true,
            epsilon_used,
            num_classes,
        })
    }

    /// Channel whose robust-loss rate equals the true rate.
    pub fn exact(epsilon: F, num_classes: usize) -> Result<Self> {
        Self::new(epsilon, epsilon, num_classes)
    }

    /// Passes `y` through the channel.
    ///
    /// Always consumes one uniform and one class draw so the random stream
    /// stays aligned whatever the rate.
    pub fn corrupt_label<R: Rng + ?Sized>(&self, y: usize, rng: &mut R) -> usize {
        let flip: f64 = rng.random();
        let replacement = rng.random_range(0..self.num_classes);
        if flip < self.epsilon_true.to_f64_lossy() {
            replacement
        } else {
            y
        }
    }

    /// Exact law of the observed label: `(1 - eps) * 1{j == y} + eps / K`.
    pub fn noisy_label_distribution(&self, y: usize) -> Result<ProbVector<F>> {
        if y >= self.num_classes {
            return input_err(format!(
                "class index {y} out of range for {} classes",
                self.num_classes
            ));
        }
        let spill = self.epsilon_true / F::from_count(self.num_classes);
        let probs = (0..self.num_classes)
            .map(|j| {
                if j == y {
                    F::one() - self.epsilon_true + spill
                } else {
                    spill
                }
            })
            .collect();
        ProbVector::new(probs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_out_of_range_rates() {
        assert!(NoiseChannel::new(1.0_f64, 0.0, 3).is_err());
        assert!(NoiseChannel::new(0.1_f64, -0.1, 3).is_err());
        assert!(NoiseChannel::new(0.1_f64, 0.1, 1).is_err());
    }

    #[test]
    fn noiseless_channel_is_identity() {
        let ch = NoiseChannel::exact(0.0_f64, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for y in (0..5).cycle().take(1000) {
            assert_eq!(ch.corrupt_label(y, &mut rng), y);
        }
        let dist = ch.noisy_label_distribution(3).unwrap();
        assert_eq!(dist.as_slice(), &[0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn distribution_examples() {
        let ch = NoiseChannel::exact(0.4_f64, 4).unwrap();
        let d = ch.noisy_label_distribution(2).unwrap();
        for (got, want) in d.as_slice().iter().zip([0.1, 0.1, 0.7, 0.1]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        let ch = NoiseChannel::exact(0.5_f64, 2).unwrap();
        assert_eq!(ch.noisy_label_distribution(0).unwrap().as_slice(), &[0.75, 0.25]);
        assert!(ch.noisy_label_distribution(2).is_err());
    }

    #[test]
    fn empirical_law_matches_exact_law() {
        let n = 200_000;
        let ch = NoiseChannel::exact(0.4_f64, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[ch.corrupt_label(2, &mut rng)] += 1;
        }
        let exact = ch.noisy_label_distribution(2).unwrap();
        for (c, p) in counts.iter().zip(exact.as_slice()) {
            let freq = *c as f64 / n as f64;
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() <= 3.0 * sd, "freq {freq} vs {p}");
        }
    }

    #[test]
    fn pure_uniform_channel_frequencies() {
        // Largest rate below 1; every class should appear about 1/4 of the time.
        let ch = NoiseChannel::exact(1.0_f64 - 1e-12, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[ch.corrupt_label(0, &mut rng)] += 1;
        }
        let sd = (0.25 * 0.75 / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() <= 4.0 * sd);
        }
    }

    #[test]
    fn corruption_frequency_within_three_sigma() {
        // A label changes with probability eps * (K - 1) / K.
        let (eps, k, n) = (0.3_f64, 5usize, 100_000usize);
        let ch = NoiseChannel::exact(eps, k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let changed = (0..n).filter(|_| ch.corrupt_label(0, &mut rng) != 0).count();
        let p = eps * (k - 1) as f64 / k as f64;
        let freq = changed as f64 / n as f64;
        assert!((freq - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt());
    }
}
