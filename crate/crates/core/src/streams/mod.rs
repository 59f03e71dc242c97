//! Sources of `(softmax, clean label)` steps and their coupling to scores and noise.
//!
//! Randomness is split into independent ChaCha8 sub-streams derived from one
//! 64-bit seed: Dirichlet draws, label draws, score tie-breaking `u`, and label
//! corruption. Switching one component on or off never shifts the others.

mod file;
mod synth;

pub use file::{load_stream, read_stream, write_stream, Record, StreamFormat};
pub use synth::{SynthConfig, SynthStream};

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::noise::NoiseChannel;
use crate::scalar::Scalar;
use crate::scores::{ProbVector, ScoreParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubStream {
    Dirichlet = 0,
    Labels = 1,
    U = 2,
    Corruption = 3,
}

/// Generator for sub-stream `which` of `seed`.
pub fn sub_stream(seed: u64, which: SubStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// Everything observed (and hidden) at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredStep<F> {
    pub probs: ProbVector<F>,
    pub y_clean: usize,
    pub y_noisy: usize,
    pub u: F,
    /// Scores of every class, rescaled into `[0, 1]`.
    pub scores_all: Vec<F>,
    pub s_clean: F,
    pub s_noisy: F,
}

/// Scores a step for known `u` and noisy label.
pub fn scored_step_with<F: Scalar>(
    probs: ProbVector<F>,
    y_clean: usize,
    y_noisy: usize,
    u: F,
    params: &ScoreParams<F>,
) -> Result<ScoredStep<F>> {
    probs.check_class(y_clean)?;
    probs.check_class(y_noisy)?;
    let scores_all = params.score_all_bounded(&probs, u)?;
    Ok(ScoredStep {
        s_clean: scores_all[y_clean],
        s_noisy: scores_all[y_noisy],
        probs,
        y_clean,
        y_noisy,
        u,
        scores_all,
    })
}

/// Draws `u` and the noisy label, then scores the step.
pub fn scored_step<F: Scalar, R1: Rng + ?Sized, R2: Rng + ?Sized>(
    probs: ProbVector<F>,
    y_clean: usize,
    channel: &NoiseChannel<F>,
    params: &ScoreParams<F>,
    u_rng: &mut R1,
    corruption_rng: &mut R2,
) -> Result<ScoredStep<F>> {
    let u = F::lit(u_rng.random::<f64>());
    let y_noisy = channel.corrupt_label(y_clean, corruption_rng);
    scored_step_with(probs, y_clean, y_noisy, u, params)
}

/// Where `(probs, y_clean)` pairs come from.
#[derive(Debug, Clone)]
pub enum Source<F> {
    Synthetic(Box<SynthStream>),
    /// Records shared between runs, replayed in file order.
    Records { records: Arc<Vec<Record<F>>>, pos: usize, horizon: usize },
}

impl<F: Scalar> Source<F> {
    pub fn synthetic(config: SynthConfig) -> Result<Self> {
        Ok(Self::Synthetic(Box::new(SynthStream::new(config)?)))
    }

    /// Replays the first `horizon` records.
    pub fn records(records: Arc<Vec<Record<F>>>, horizon: usize) -> Result<Self> {
        if horizon > records.len() {
            return crate::error::input_err(format!(
                "horizon {horizon} exceeds the {} records in the stream file",
                records.len()
            ));
        }
        Ok(Self::Records { records, pos: 0, horizon })
    }

    /// Whether exact conditional label laws are known.
    pub fn is_calibrated(&self) -> bool {
        matches!(self, Self::Synthetic(_))
    }

    pub fn next_record(&mut self) -> Option<Record<F>> {
        match self {
            Self::Synthetic(s) => s.next_step(),
            Self::Records { records, pos, horizon } => {
                if *pos >= *horizon {
                    return None;
                }
                *pos += 1;
                Some(records[*pos - 1].clone())
            }
        }
    }
}

/// A source combined with score function, noise channel and their random sub-streams.
#[derive(Debug, Clone)]
pub struct ScoredStream<F> {
    source: Source<F>,
    channel: NoiseChannel<F>,
    params: ScoreParams<F>,
    u_rng: ChaCha8Rng,
    corruption_rng: ChaCha8Rng,
}

impl<F: Scalar> ScoredStream<F> {
    pub fn new(source: Source<F>, channel: NoiseChannel<F>, params: ScoreParams<F>, seed: u64) -> Self {
        Self {
            source,
            channel,
            params,
            u_rng: sub_stream(seed, SubStream::U),
            corruption_rng: sub_stream(seed, SubStream::Corruption),
        }
    }

    pub fn source(&self) -> &Source<F> {
        &self.source
    }
}

impl<F: Scalar> Iterator for ScoredStream<F> {
    type Item = Result<ScoredStep<F>>;

    fn next(&mut self) -> Option<Self::Item> {
        let (probs, y) = self.source.next_record()?;
        Some(scored_step(
            probs,
            y,
            &self.channel,
            &self.params,
            &mut self.u_rng,
            &mut self.corruption_rng,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scores::ScoreKind;

    #[test]
    fn lac_forced_noisy_label() {
        let p = ProbVector::new(vec![0.7_f64, 0.2, 0.1]).unwrap();
        let step = scored_step_with(p, 0, 2, 0.5, &ScoreParams::new(ScoreKind::Lac)).unwrap();
        assert!((step.s_clean - 0.3).abs() < 1e-15);
        assert!((step.s_noisy - 0.9).abs() < 1e-15);
    }

    #[test]
    fn coupling_and_noiseless_identity() {
        let cfg = SynthConfig::new(6, 0.5, 2000, 4);
        for eps in [0.0, 0.4] {
            let ch = NoiseChannel::exact(eps, 6).unwrap();
            for kind in [ScoreKind::Lac, ScoreKind::Aps, ScoreKind::Raps, ScoreKind::Saps] {
                let stream =
                    ScoredStream::new(Source::synthetic(cfg).unwrap(), ch, ScoreParams::new(kind), 4);
                for step in stream {
                    let s = step.unwrap();
                    assert_eq!(s.s_noisy, s.scores_all[s.y_noisy]);
                    assert_eq!(s.s_clean, s.scores_all[s.y_clean]);
                    if eps == 0.0 {
                        assert_eq!(s.y_noisy, s.y_clean);
                    }
                }
            }
        }
    }

    #[test]
    fn corruption_does_not_perturb_other_draws() {
        let cfg = SynthConfig::new(5, 0.5, 500, 8);
        let params = ScoreParams::new(ScoreKind::Aps);
        let run = |eps| {
            let ch = NoiseChannel::exact(eps, 5).unwrap();
            ScoredStream::new(Source::<f64>::synthetic(cfg).unwrap(), ch, params, 8)
                .map(|s| {
                    let s = s.unwrap();
                    (s.probs, s.y_clean, s.u)
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(0.0), run(0.3));
    }

    #[test]
    fn oracle_set_coverage_is_calibrated() {
        let n = 50_000;
        let mut src = Source::<f64>::synthetic(SynthConfig::new(4, 1.0, n, 21)).unwrap();
        let c = 0.3;
        let (mut hits, mut mass) = (0usize, 0.0);
        while let Some((p, y)) = src.next_record() {
            let set: Vec<usize> = (0..4).filter(|&j| p.as_slice()[j] >= c).collect();
            hits += usize::from(set.contains(&y));
            mass += p.mass_of(&set);
        }
        let diff = (hits as f64 - mass) / n as f64;
        assert!(diff.abs() <= 3.0 * (0.25 / n as f64).sqrt(), "{diff}");
    }

    #[test]
    fn records_source_respects_horizon() {
        let recs = Arc::new(vec![
            (ProbVector::new(vec![0.5, 0.5]).unwrap(), 0),
            (ProbVector::new(vec![0.9, 0.1]).unwrap(), 1),
        ]);
        assert!(Source::<f64>::records(recs.clone(), 3).is_err());
        let mut s = Source::records(recs, 1).unwrap();
        assert!(!s.is_calibrated());
        assert_eq!(s.next_record().unwrap().1, 0);
        assert!(s.next_record().is_none());
    }
}
