//! Experiment configuration: a flat TOML file.
//!
//! ```toml
//! stream = "synthetic"        # or "file" with stream_path
//! num_classes = 10
//! concentration = 0.3
//! score = "lac"
//! alpha = 0.1
//! epsilon_true = 0.1
//! epsilon_used = 0.1          # defaults to epsilon_true
//! updater = "nr-aci"
//! schedule = "constant"       # "decaying" (decay_base / t^decay_exponent) or "sqrt-decay"
//! eta = 0.05
//! horizon = 50000
//! seeds = "1-20"              # or [1, 2, 3] or "1,2,3"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::scores::{ScoreKind, ScoreParams};
use crate::streams::{StreamFormat, SynthConfig};
use crate::updaters::{default_sf_eta, LearningRateSchedule, UpdaterKind};
use crate::verify::sqrt_decay_schedule;

fn cfg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum StreamSpec {
    Synthetic {
        num_classes: usize,
        concentration: f64,
        shift_at: Option<usize>,
        shift_concentration: Option<f64>,
    },
    File {
        path: PathBuf,
        format: StreamFormat,
        csv_header: bool,
    },
}

impl StreamSpec {
    pub fn synth_config(&self, horizon: usize, seed: u64) -> Option<SynthConfig> {
        match *self {
            Self::Synthetic {
                num_classes,
                concentration,
                shift_at,
                shift_concentration,
            } => Some(SynthConfig {
                num_classes,
                concentration,
                horizon,
                seed,
                shift_at,
                shift_concentration,
            }),
            Self::File { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleSpec {
    Constant { eta: f64 },
    Decaying { base: f64, exponent: f64 },
    /// `((1 - eps_used)/(1 + eps_used) + eta0) / sqrt(t)`.
    SqrtDecay { eta0: f64 },
}

impl ScheduleSpec {
    pub fn resolve(&self, epsilon_used: f64) -> LearningRateSchedule<f64> {
        match *self {
            Self::Constant { eta } => LearningRateSchedule::Constant(eta),
            Self::Decaying { base, exponent } => LearningRateSchedule::Decaying { base, exponent },
            Self::SqrtDecay { eta0 } => sqrt_decay_schedule(epsilon_used, eta0),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Constant { .. } => "constant",
            Self::Decaying { .. } => "decaying",
            Self::SqrtDecay { .. } => "sqrt-decay",
        }
    }

    fn parse(name: &str, raw: &RawConfig) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "constant" => Ok(Self::Constant {
                eta: raw.eta.unwrap_or(0.05),
            }),
            "decaying" | "dynamic" => Ok(Self::Decaying {
                base: raw.decay_base.unwrap_or(1.0),
                exponent: raw.decay_exponent.unwrap_or(0.6),
            }),
            "sqrt-decay" => Ok(Self::SqrtDecay {
                eta0: raw.eta0.unwrap_or(0.0),
            }),
            other => cfg_err(format!("unknown schedule '{other}'")),
        }
    }
}

/// Cells of a sweep: every combination of the listed values.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub updaters: Vec<UpdaterKind>,
    pub schedules: Vec<ScheduleSpec>,
    pub epsilons: Vec<f64>,
    pub alphas: Vec<f64>,
    pub horizons: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub stream: StreamSpec,
    pub score: ScoreParams<f64>,
    pub alpha: f64,
    pub epsilon_true: f64,
    pub epsilon_used: f64,
    pub updater: UpdaterKind,
    pub schedule: ScheduleSpec,
    /// Initial threshold; `1 - alpha` when absent.
    pub tau1: Option<f64>,
    /// Required for synthetic streams; defaults to the record count for files.
    pub horizon: Option<usize>,
    pub seeds: Vec<u64>,
    pub local_window: usize,
    pub output_dir: Option<PathBuf>,
    pub lifetime_multiplier: usize,
    pub sf_eta: f64,
    /// Write `steps.csv` even above [`Self::STEPS_CSV_LIMIT`] steps.
    pub emit_steps: bool,
    /// Prefix lengths at which coverage errors are reported.
    pub checkpoints: Vec<usize>,
    pub sweep: SweepSpec,
    /// Random cases per identity in the `verify` command.
    pub verify_cases: usize,
}

impl ExperimentConfig {
    /// Above this horizon, per-step CSV needs `emit_steps`.
    pub const STEPS_CSV_LIMIT: usize = 100_000;

    /// Synthetic-stream defaults: LAC, alpha 0.1, no noise, ACI with constant eta 0.05, seed 1.
    pub fn synthetic(num_classes: usize, concentration: f64, horizon: usize) -> Self {
        Self {
            stream: StreamSpec::Synthetic {
                num_classes,
                concentration,
                shift_at: None,
                shift_concentration: None,
            },
            score: ScoreParams::new(ScoreKind::Lac),
            alpha: 0.1,
            epsilon_true: 0.0,
            epsilon_used: 0.0,
            updater: UpdaterKind::Aci,
            schedule: ScheduleSpec::Constant { eta: 0.05 },
            tau1: None,
            horizon: Some(horizon),
            seeds: vec![1],
            local_window: 200,
            output_dir: None,
            lifetime_multiplier: 8,
            sf_eta: default_sf_eta(),
            emit_steps: false,
            checkpoints: Vec::new(),
            sweep: SweepSpec {
                updaters: vec![UpdaterKind::Aci, UpdaterKind::NrAci],
                schedules: vec![
                    ScheduleSpec::Constant { eta: 0.05 },
                    ScheduleSpec::Decaying { base: 1.0, exponent: 0.6 },
                ],
                epsilons: vec![0.05, 0.1, 0.15],
                alphas: vec![0.05, 0.1],
                horizons: Vec::new(),
            },
            verify_cases: 1000,
        }
    }

    pub fn tau1(&self) -> f64 {
        self.tau1.unwrap_or(1.0 - self.alpha)
    }

    pub fn learning_rate(&self) -> LearningRateSchedule<f64> {
        self.schedule.resolve(self.epsilon_used)
    }

    /// Reads a config file; relative stream paths resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        raw.resolve(base_dir)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return cfg_err(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        for (name, e) in [("epsilon_true", self.epsilon_true), ("epsilon_used", self.epsilon_used)] {
            if !(0.0..1.0).contains(&e) {
                return cfg_err(format!("{name} must lie in [0, 1), got {e}"));
            }
        }
        if self.horizon == Some(0) {
            return cfg_err("horizon must be >= 1");
        }
        if self.seeds.is_empty() {
            return cfg_err("at least one seed is required");
        }
        if self.lifetime_multiplier == 0 {
            return cfg_err("lifetime_multiplier must be >= 1");
        }
        if !(self.sf_eta > 0.0 && self.sf_eta.is_finite()) {
            return cfg_err(format!("sf_eta must be > 0, got {}", self.sf_eta));
        }
        if let Some(t) = self.tau1 {
            if !t.is_finite() {
                return cfg_err("tau1 must be finite");
            }
        }
        self.score.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.learning_rate()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        match &self.stream {
            StreamSpec::Synthetic { .. } => {
                let Some(h) = self.horizon else {
                    return cfg_err("synthetic streams need a horizon");
                };
                self.stream
                    .synth_config(h, 0)
                    .expect("synthetic")
                    .validate()
                    .map_err(|e| Error::Config(e.to_string()))
            }
            StreamSpec::File { .. } => Ok(()),
        }
    }
}

/// Seeds as a TOML array or a string like `"1,2,5-8"`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SeedList {
    List(Vec<u64>),
    Text(String),
}

pub fn parse_seed_list(text: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |s: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|e| Error::Config(format!("bad seed '{s}': {e}")))
        };
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return cfg_err(format!("empty seed range '{part}'"));
                }
                out.extend(a..=b);
            }
            None => out.push(num(part)?),
        }
    }
    if out.is_empty() {
        return cfg_err("empty seed list");
    }
    Ok(out)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    stream: Option<String>,
    stream_path: Option<PathBuf>,
    stream_format: Option<StreamFormat>,
    csv_header: Option<bool>,
    num_classes: Option<usize>,
    concentration: Option<f64>,
    shift_at: Option<usize>,
    shift_concentration: Option<f64>,
    score: Option<ScoreKind>,
    score_lambda: Option<f64>,
    score_k_reg: Option<usize>,
    alpha: Option<f64>,
    epsilon_true: Option<f64>,
    epsilon_used: Option<f64>,
    updater: Option<UpdaterKind>,
    schedule: Option<String>,
    eta: Option<f64>,
    decay_base: Option<f64>,
    decay_exponent: Option<f64>,
    eta0: Option<f64>,
    tau1: Option<f64>,
    horizon: Option<usize>,
    seeds: Option<SeedList>,
    local_window: Option<usize>,
    output_dir: Option<PathBuf>,
    lifetime_multiplier: Option<usize>,
    sf_eta: Option<f64>,
    emit_steps: Option<bool>,
    checkpoints: Option<Vec<usize>>,
    sweep_updaters: Option<Vec<UpdaterKind>>,
    sweep_schedules: Option<Vec<String>>,
    sweep_epsilons: Option<Vec<f64>>,
    sweep_alphas: Option<Vec<f64>>,
    sweep_horizons: Option<Vec<usize>>,
    verify_cases: Option<usize>,
}

impl RawConfig {
    fn resolve(self, base_dir: &Path) -> Result<ExperimentConfig> {
        let kind = self.stream.as_deref().unwrap_or(if self.stream_path.is_some() {
            "file"
        } else {
            "synthetic"
        });
        let stream = match kind.trim().to_ascii_lowercase().as_str() {
            "synthetic" => StreamSpec::Synthetic {
                num_classes: self.num_classes.unwrap_or(10),
                concentration: self.concentration.unwrap_or(0.3),
                shift_at: self.shift_at,
                shift_concentration: self.shift_concentration,
            },
            "file" => {
                let Some(rel) = &self.stream_path else {
                    return cfg_err("stream = \"file\" needs stream_path");
                };
                let path = if rel.is_absolute() { rel.clone() } else { base_dir.join(rel) };
                let format = match self.stream_format {
                    Some(f) => f,
                    None => StreamFormat::from_extension(&path).ok_or_else(|| {
                        Error::Config(format!(
                            "cannot infer stream_format from {}; set \"jsonl\" or \"csv\"",
                            path.display()
                        ))
                    })?,
                };
                StreamSpec::File {
                    path,
                    format,
                    csv_header: self.csv_header.unwrap_or(false),
                }
            }
            other => return cfg_err(format!("unknown stream '{other}'")),
        };

        let mut score = ScoreParams::new(self.score.unwrap_or(ScoreKind::Lac));
        if let Some(l) = self.score_lambda {
            score = score.with_lambda(l);
        }
        if let Some(k) = self.score_k_reg {
            score = score.with_k_reg(k);
        }
        let epsilon_true = self.epsilon_true.unwrap_or(0.0);
        let schedule = ScheduleSpec::parse(self.schedule.as_deref().unwrap_or("constant"), &self)?;
        let defaults = ExperimentConfig::synthetic(2, 1.0, 1).sweep;
        let sweep = SweepSpec {
            updaters: self.sweep_updaters.clone().unwrap_or(defaults.updaters),
            schedules: match &self.sweep_schedules {
                Some(names) => names
                    .iter()
                    .map(|n| ScheduleSpec::parse(n, &self))
                    .collect::<Result<_>>()?,
                None => defaults.schedules,
            },
            epsilons: self.sweep_epsilons.clone().unwrap_or(defaults.epsilons),
            alphas: self.sweep_alphas.clone().unwrap_or(defaults.alphas),
            horizons: self.sweep_horizons.clone().unwrap_or_default(),
        };
        let seeds = match self.seeds {
            None => vec![1],
            Some(SeedList::List(v)) => v,
            Some(SeedList::Text(s)) => parse_seed_list(&s)?,
        };

        let cfg = ExperimentConfig {
            stream,
            score,
            alpha: self.alpha.unwrap_or(0.1),
            epsilon_true,
            epsilon_used: self.epsilon_used.unwrap_or(epsilon_true),
            updater: self.updater.unwrap_or(UpdaterKind::Aci),
            schedule,
            tau1: self.tau1,
            horizon: self.horizon,
            seeds,
            local_window: self.local_window.unwrap_or(200),
            output_dir: self.output_dir,
            lifetime_multiplier: self.lifetime_multiplier.unwrap_or(8),
            sf_eta: self.sf_eta.unwrap_or_else(default_sf_eta),
            emit_steps: self.emit_steps.unwrap_or(false),
            checkpoints: self.checkpoints.unwrap_or_default(),
            sweep,
            verify_cases: self.verify_cases.unwrap_or(1000),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
