//! Threshold-update algorithms and the prediction-set rule.

mod aci;
mod saocp;
mod schedule;
mod sf_ogd;

pub use aci::Aci;
pub use saocp::{lifetime, Expert, Saocp};
pub use schedule::LearningRateSchedule;
pub use sf_ogd::{default_sf_eta, SfOgd, SfOgdState};

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Error, Result};
use crate::losses::{Objective, Observation};
use crate::scalar::Scalar;

/// `{y : scores[y] <= tau}`.
pub fn build_prediction_set<F: Scalar>(scores_all: &[F], tau: F) -> Vec<usize> {
    scores_all
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s <= tau)
        .map(|(y, _)| y)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UpdaterKind {
    #[serde(rename = "aci")]
    Aci,
    #[serde(rename = "nr-aci")]
    NrAci,
    #[serde(rename = "sf-ogd")]
    SfOgd,
    #[serde(rename = "nr-sf-ogd")]
    NrSfOgd,
    #[serde(rename = "saocp")]
    Saocp,
    #[serde(rename = "nr-saocp")]
    NrSaocp,
}

impl UpdaterKind {
    pub const ALL: [UpdaterKind; 6] = [
        Self::Aci,
        Self::NrAci,
        Self::SfOgd,
        Self::NrSfOgd,
        Self::Saocp,
        Self::NrSaocp,
    ];

    pub fn is_robust(self) -> bool {
        matches!(self, Self::NrAci | Self::NrSfOgd | Self::NrSaocp)
    }

    /// Same algorithm with the other loss.
    pub fn counterpart(self) -> Self {
        match self {
            Self::Aci => Self::NrAci,
            Self::NrAci => Self::Aci,
            Self::SfOgd => Self::NrSfOgd,
            Self::NrSfOgd => Self::SfOgd,
            Self::Saocp => Self::NrSaocp,
            Self::NrSaocp => Self::Saocp,
        }
    }

    pub fn is_aci(self) -> bool {
        matches!(self, Self::Aci | Self::NrAci)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Aci => "aci",
            Self::NrAci => "nr-aci",
            Self::SfOgd => "sf-ogd",
            Self::NrSfOgd => "nr-sf-ogd",
            Self::Saocp => "saocp",
            Self::NrSaocp => "nr-saocp",
        }
    }
}

impl std::fmt::Display for UpdaterKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for UpdaterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .map_or_else(|| input_err(format!("unknown updater '{s}'")), Ok)
    }
}

/// Hyper-parameters shared by every updater kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdaterParams<F> {
    pub tau1: F,
    pub schedule: LearningRateSchedule<F>,
    pub sf_eta: F,
    pub lifetime_multiplier: usize,
}

/// Any of the supported updaters behind one interface.
#[derive(Debug, Clone)]
pub enum Updater<F> {
    Aci(Aci<F>),
    SfOgd(SfOgd<F>),
    Saocp(Saocp<F>),
}

impl<F: Scalar> Updater<F> {
    /// `objective.robust` is overridden by `kind`.
    pub fn new(kind: UpdaterKind, params: &UpdaterParams<F>, objective: Objective<F>) -> Self {
        let objective = Objective {
            params: objective.params,
            robust: kind.is_robust(),
        };
        match kind {
            UpdaterKind::Aci | UpdaterKind::NrAci => {
                Self::Aci(Aci::new(params.tau1, params.schedule, objective))
            }
            UpdaterKind::SfOgd | UpdaterKind::NrSfOgd => {
                Self::SfOgd(SfOgd::new(params.tau1, params.sf_eta, objective))
            }
            UpdaterKind::Saocp | UpdaterKind::NrSaocp => Self::Saocp(Saocp::new(
                params.tau1,
                params.lifetime_multiplier,
                params.sf_eta,
                objective,
            )),
        }
    }

    /// Threshold for the step about to be predicted.
    #[inline]
    pub fn threshold(&self) -> F {
        match self {
            Self::Aci(a) => a.tau(),
            Self::SfOgd(s) => s.state().tau,
            Self::Saocp(s) => s.tau(),
        }
    }

    /// Feeds the observation of the current step; returns the gradient at the used threshold.
    #[inline]
    pub fn update(&mut self, obs: &Observation<'_, F>) -> F {
        match self {
            Self::Aci(a) => a.step(obs),
            Self::SfOgd(s) => s.step(obs),
            Self::Saocp(s) => s.step(obs),
        }
    }

    pub fn objective(&self) -> &Objective<F> {
        match self {
            Self::Aci(a) => a.objective(),
            Self::SfOgd(s) => s.objective(),
            Self::Saocp(s) => s.objective(),
        }
    }

    /// Sum of the SAOCP aggregation weights, if this is SAOCP.
    pub fn weight_sum(&self) -> Option<F> {
        match self {
            Self::Saocp(s) => Some(s.weights().iter().fold(F::zero(), |a, &b| a + b)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prediction_set_examples() {
        assert_eq!(build_prediction_set(&[0.2, 0.5, 0.9], 0.5), vec![0, 1]);
        assert!(build_prediction_set(&[0.2, 0.5, 0.9], 0.1).is_empty());
        assert_eq!(build_prediction_set(&[0.2, 0.5, 0.9], 0.9), vec![0, 1, 2]);
    }

    #[test]
    fn kind_parsing_round_trip() {
        for k in UpdaterKind::ALL {
            assert_eq!(k.as_str().parse::<UpdaterKind>().unwrap(), k);
            assert_eq!(k.counterpart().counterpart(), k);
            assert_ne!(k.is_robust(), k.counterpart().is_robust());
        }
        assert_eq!("NR_SAOCP".parse::<UpdaterKind>().unwrap(), UpdaterKind::NrSaocp);
        assert!("foo".parse::<UpdaterKind>().is_err());
    }
}
