//! Non-conformity scores for classification.
//!
//! Four score families are supported, all evaluated on a softmax vector:
//!
//! * `Lac`:  `1 - p[y]`
//! * `Aps`:  cumulative mass of the classes ranked above `y`, plus `u * p[y]`
//! * `Raps`: APS plus `lambda * max(0, rank(y) - k_reg)`
//! * `Saps`: `u * p_max` for the top class, else `p_max + (rank(y) - 2 + u) * lambda`
//!
//! Ranks are 1-based in descending probability order; equal probabilities are
//! ordered by ascending class index. A single uniform draw `u` is shared by all
//! classes of a time step, so the noisy score is always an entry of the
//! all-class vector.
//!
//! RAPS and SAPS scores can exceed 1. [`ScoreParams::score_all_bounded`]
//! divides by the analytic maximum so every score lies in `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Error, Result};
use crate::scalar::Scalar;

/// A validated softmax vector: `K >= 2`, entries in `[0, 1]`, sum 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector<F> {
    probs: Vec<F>,
}

impl<F: Scalar> ProbVector<F> {
    pub fn new(probs: Vec<F>) -> Result<Self> {
        if probs.len() < 2 {
            return input_err(format!("need at least 2 classes, got {}", probs.len()));
        }
        let mut sum = F::zero();
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < F::zero() || p > F::one() {
                return input_err(format!("probability {i} = {p} outside [0, 1]"));
            }
            sum = sum + p;
        }
        if (sum - F::one()).abs() > F::prob_sum_tolerance() {
            return input_err(format!("probabilities sum to {sum}, expected 1"));
        }
        Ok(Self { probs })
    }

    /// Uniform distribution over `k` classes.
    pub fn uniform(k: usize) -> Result<Self> {
        if k < 2 {
            return input_err(format!("need at least 2 classes, got {k}"));
        }
        Ok(Self {
            probs: vec![F::one() / F::from_count(k); k],
        })
    }

    #[inline]
    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[F] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<F> {
        self.probs
    }

    /// Class indices in descending probability order, ties by ascending index.
    pub fn descending_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.probs.len()).collect();
        // Stable sort keeps ascending index among equal values.
        order.sort_by(|&a, &b| {
            self.probs[b]
                .partial_cmp(&self.probs[a])
                .expect("validated probabilities are finite")
        });
        order
    }

    /// 1-based rank of class `y`.
    pub fn rank_of(&self, y: usize) -> usize {
        let py = self.probs[y];
        // Classes strictly above, plus equal-valued classes with a lower index.
        1 + self
            .probs
            .iter()
            .enumerate()
            .filter(|&(j, &p)| p > py || (p == py && j < y))
            .count()
    }

    pub fn max_prob(&self) -> F {
        self.probs.iter().copied().fold(F::zero(), F::max)
    }

    /// Probability mass of the classes in `set`.
    pub fn mass_of(&self, set: &[usize]) -> F {
        set.iter().fold(F::zero(), |acc, &y| acc + self.probs[y])
    }

    pub(crate) fn check_class(&self, y: usize) -> Result<()> {
        if y >= self.probs.len() {
            return input_err(format!(
                "class index {y} out of range for {} classes",
                self.probs.len()
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Lac,
    Aps,
    Raps,
    Saps,
}

impl std::str::FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lac" => Ok(Self::Lac),
            "aps" => Ok(Self::Aps),
            "raps" => Ok(Self::Raps),
            "saps" => Ok(Self::Saps),
            other => input_err(format!("unknown score kind '{other}'")),
        }
    }
}

impl std::fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Lac => "lac",
            Self::Aps => "aps",
            Self::Raps => "raps",
            Self::Saps => "saps",
        })
    }
}

/// Score family plus its penalty parameters.
///
/// `lambda` and `k_reg` are ignored by LAC and APS; `k_reg` is ignored by SAPS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreParams<F> {
    pub kind: ScoreKind,
    pub lambda: F,
    pub k_reg: usize,
}

impl<F: Scalar> ScoreParams<F> {
    /// Default penalties: RAPS `lambda = 0.01, k_reg = 1`; SAPS `lambda = 0.1`.
    pub fn new(kind: ScoreKind) -> Self {
        let (lambda, k_reg) = match kind {
            ScoreKind::Lac | ScoreKind::Aps => (0.0, 0),
            ScoreKind::Raps => (0.01, 1),
            ScoreKind::Saps => (0.1, 0),
        };
        Self {
            kind,
            lambda: F::lit(lambda),
            k_reg,
        }
    }

    pub fn with_lambda(mut self, lambda: F) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_k_reg(mut self, k_reg: usize) -> Self {
        self.k_reg = k_reg;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < F::zero() {
            return input_err(format!("score lambda must be >= 0, got {}", self.lambda));
        }
        Ok(())
    }

    /// Raw score of class `y`.
    pub fn score(&self, p: &ProbVector<F>, y: usize, u: F) -> Result<F> {
        match self.kind {
            ScoreKind::Lac => lac_score(p, y),
            ScoreKind::Aps => aps_score(p, y, u),
            ScoreKind::Raps => raps_score(p, y, u, self),
            ScoreKind::Saps => saps_score(p, y, u, self),
        }
    }

    /// Analytic maximum of the raw score over classes and `u`.
    pub fn max_score(&self, p: &ProbVector<F>) -> F {
        let k = p.num_classes();
        match self.kind {
            ScoreKind::Lac | ScoreKind::Aps => F::one(),
            ScoreKind::Raps => {
                F::one() + self.lambda * F::from_count(k.saturating_sub(self.k_reg))
            }
            ScoreKind::Saps => p.max_prob() + F::from_count(k - 1) * self.lambda,
        }
    }

    /// All-class scores rescaled into `[0, 1]` by [`Self::max_score`].
    ///
    /// Entries are clamped to `[0, 1]` to absorb rounding in the cumulative
    /// sums; for LAC the result equals `1 - p` exactly.
    pub fn score_all_bounded(&self, p: &ProbVector<F>, u: F) -> Result<Vec<F>> {
        let mut scores = score_all_classes(p, u, self)?;
        let divisor = self.max_score(p);
        for s in &mut scores {
            let scaled = if divisor == F::one() { *s } else { *s / divisor };
            *s = scaled.max(F::zero()).min(F::one());
        }
        Ok(scores)
    }
}

fn check_u<F: Scalar>(u: F) -> Result<()> {
    if !(u >= F::zero() && u <= F::one()) {
        return input_err(format!("u = {u} outside [0, 1]"));
    }
    Ok(())
}

/// `1 - p[y]`.
pub fn lac_score<F: Scalar>(p: &ProbVector<F>, y: usize) -> Result<F> {
    p.check_class(y)?;
    Ok(F::one() - p.probs[y])
}

/// Sum of the probabilities ranked strictly above `y`, accumulated in rank order.
fn mass_above<F: Scalar>(p: &ProbVector<F>, order: &[usize], rank: usize) -> F {
    order[..rank - 1]
        .iter()
        .fold(F::zero(), |acc, &j| acc + p.probs[j])
}

pub fn aps_score<F: Scalar>(p: &ProbVector<F>, y: usize, u: F) -> Result<F> {
    p.check_class(y)?;
    check_u(u)?;
    let order = p.descending_order();
    let rank = p.rank_of(y);
    Ok(mass_above(p, &order, rank) + u * p.probs[y])
}

pub fn raps_score<F: Scalar>(
    p: &ProbVector<F>,
    y: usize,
    u: F,
    params: &ScoreParams<F>,
) -> Result<F> {
    let aps = aps_score(p, y, u)?;
    let rank = p.rank_of(y);
    Ok(aps + params.lambda * F::from_count(rank.saturating_sub(params.k_reg)))
}

pub fn saps_score<F: Scalar>(
    p: &ProbVector<F>,
    y: usize,
    u: F,
    params: &ScoreParams<F>,
) -> Result<F> {
    p.check_class(y)?;
    check_u(u)?;
    Ok(saps_at_rank(p.max_prob(), p.rank_of(y), u, params.lambda))
}

#[inline]
fn saps_at_rank<F: Scalar>(p_max: F, rank: usize, u: F, lambda: F) -> F {
    if rank == 1 {
        u * p_max
    } else {
        // rank >= 2, so (rank - 2) never underflows.
        p_max + (F::from_count(rank - 2) + u) * lambda
    }
}

/// Scores of every class with a shared `u`; entry `y` equals the single-class score bit for bit.
pub fn score_all_classes<F: Scalar>(
    p: &ProbVector<F>,
    u: F,
    params: &ScoreParams<F>,
) -> Result<Vec<F>> {
    let k = p.num_classes();
    if params.kind == ScoreKind::Lac {
        return Ok(p.probs.iter().map(|&q| F::one() - q).collect());
    }
    check_u(u)?;
    let order = p.descending_order();
    let p_max = p.probs[order[0]];
    let mut out = vec![F::zero(); k];
    let mut above = F::zero();
    for (idx, &y) in order.iter().enumerate() {
        let rank = idx + 1;
        let py = p.probs[y];
        out[y] = match params.kind {
            ScoreKind::Aps => above + u * py,
            ScoreKind::Raps => {
                above + u * py + params.lambda * F::from_count(rank.saturating_sub(params.k_reg))
            }
            ScoreKind::Saps => saps_at_rank(p_max, rank, u, params.lambda),
            ScoreKind::Lac => unreachable!(),
        };
        above = above + py;
    }
    Ok(out)
}
