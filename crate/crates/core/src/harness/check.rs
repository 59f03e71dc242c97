//! The `verify` command: exact-enumeration identities on random cases plus the
//! run-level theory checks of the configured experiment.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::run::run_experiment;
use crate::error::Result;
use crate::losses::LossParams;
use crate::scores::{ProbVector, ScoreKind, ScoreParams};
use crate::verify::{check_distribution_identity, check_unbiasedness, CheckVerdict};

pub const ORACLE_ALPHAS: [f64; 2] = [0.05, 0.1];
pub const ORACLE_EPSILONS: [f64; 5] = [0.0, 0.05, 0.1, 0.3, 0.6];
pub const SCORE_KINDS: [ScoreKind; 4] = [ScoreKind::Lac, ScoreKind::Aps, ScoreKind::Raps, ScoreKind::Saps];

/// One random input to the exact identities.
#[derive(Debug, Clone)]
pub struct OracleCase {
    pub probs: ProbVector<f64>,
    pub y_clean: usize,
    pub tau: f64,
    pub u: f64,
    pub alpha: f64,
    pub epsilon: f64,
}

/// `K` in `2..=10`, random softmax, `tau` in `[-0.1, 1.1]`, `u` in `[0, 1)`.
pub fn random_oracle_case<R: Rng + ?Sized>(rng: &mut R) -> OracleCase {
    let k = rng.random_range(2..=10);
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-9).collect();
    let sum: f64 = raw.iter().sum();
    OracleCase {
        probs: ProbVector::new(raw.into_iter().map(|x| x / sum).collect())
            .expect("normalized vector"),
        y_clean: rng.random_range(0..k),
        tau: rng.random_range(-0.1..=1.1),
        u: rng.random(),
        alpha: ORACLE_ALPHAS[rng.random_range(0..ORACLE_ALPHAS.len())],
        epsilon: ORACLE_EPSILONS[rng.random_range(0..ORACLE_EPSILONS.len())],
    }
}

/// Thresholds `0, 0.01, ..., 1`.
pub fn unit_grid(points: usize) -> Vec<f64> {
    (0..points).map(|i| i as f64 / (points - 1) as f64).collect()
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IdentityTally {
    pub checked: usize,
    pub failed: usize,
    pub max_deviation: f64,
}

impl IdentityTally {
    fn add(&mut self, v: &CheckVerdict) {
        self.checked += 1;
        self.failed += usize::from(!v.passed);
        self.max_deviation = self.max_deviation.max(v.observed);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub cases: usize,
    pub unbiasedness: IdentityTally,
    pub distribution_identity: IdentityTally,
    /// Theory checks of each seed of the configured run.
    pub runs: BTreeMap<u64, BTreeMap<String, CheckVerdict>>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.unbiasedness.failed == 0
            && self.distribution_identity.failed == 0
            && self.runs.values().flat_map(|m| m.values()).all(|v| v.passed)
    }

    /// One `PASS`/`FAIL` line per check family and run verdict.
    pub fn lines(&self) -> Vec<String> {
        let tally = |name: &str, t: &IdentityTally| {
            format!(
                "{} {name}: {}/{} cases, max deviation {:.3e}",
                if t.failed == 0 { "PASS" } else { "FAIL" },
                t.checked - t.failed,
                t.checked,
                t.max_deviation
            )
        };
        let mut out = vec![
            tally("unbiasedness", &self.unbiasedness),
            tally("distribution_identity", &self.distribution_identity),
        ];
        for (seed, checks) in &self.runs {
            for v in checks.values() {
                out.push(format!("seed {seed}: {v}"));
            }
        }
        out
    }
}

/// Checks both identities on `cases` random inputs, each under all four scores.
pub fn oracle_checks(cases: usize, seed: u64) -> Result<(IdentityTally, IdentityTally)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = unit_grid(101);
    let mut unbiased = IdentityTally::default();
    let mut identity = IdentityTally::default();
    for _ in 0..cases {
        let c = random_oracle_case(&mut rng);
        let lp = LossParams::new(c.alpha, c.epsilon, c.probs.num_classes())?;
        for kind in SCORE_KINDS {
            let sp = ScoreParams::new(kind);
            unbiased.add(&check_unbiasedness(&c.probs, c.y_clean, c.tau, c.u, &sp, &lp)?);
            identity.add(&check_distribution_identity(
                &c.probs, c.y_clean, &grid, c.u, &sp, c.epsilon,
            )?);
        }
    }
    Ok((unbiased, identity))
}

pub fn verify(config: &ExperimentConfig) -> Result<VerifyReport> {
    let (unbiasedness, distribution_identity) =
        oracle_checks(config.verify_cases, config.seeds[0])?;
    let runs = run_experiment(config)?
        .into_iter()
        .map(|r| (r.summary.seed, r.summary.theory_checks))
        .collect();
    Ok(VerifyReport {
        cases: config.verify_cases,
        unbiasedness,
        distribution_identity,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_cases_pass() {
        let (u, d) = oracle_checks(200, 5).unwrap();
        assert_eq!(u.checked, 800);
        assert_eq!(u.failed, 0, "{u:?}");
        assert_eq!(d.failed, 0, "{d:?}");
    }

    #[test]
    fn grid_endpoints() {
        let g = unit_grid(101);
        assert_eq!(g.len(), 101);
        assert_eq!((g[0], g[100]), (0.0, 1.0));
    }
}
