//! Online conformal prediction for classification under uniform label noise.

pub mod error;
pub mod harness;
pub mod losses;
pub mod metrics;
pub mod noise;
pub mod scalar;
pub mod scores;
pub mod streams;
pub mod updaters;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ProbVectorF64 = scores::ProbVector<f64>;
pub type ProbVectorF32 = scores::ProbVector<f32>;
pub type ScoreParamsF64 = scores::ScoreParams<f64>;
pub type ScoreParamsF32 = scores::ScoreParams<f32>;
pub type NoiseChannelF64 = noise::NoiseChannel<f64>;
pub type NoiseChannelF32 = noise::NoiseChannel<f32>;
pub type LossParamsF64 = losses::LossParams<f64>;
pub type LossParamsF32 = losses::LossParams<f32>;
pub type ScheduleF64 = updaters::LearningRateSchedule<f64>;
pub type ScheduleF32 = updaters::LearningRateSchedule<f32>;
pub type AciF64 = updaters::Aci<f64>;
pub type AciF32 = updaters::Aci<f32>;
pub type SfOgdF64 = updaters::SfOgd<f64>;
pub type SfOgdF32 = updaters::SfOgd<f32>;
pub type SaocpF64 = updaters::Saocp<f64>;
pub type SaocpF32 = updaters::Saocp<f32>;
pub type UpdaterF64 = updaters::Updater<f64>;
pub type UpdaterF32 = updaters::Updater<f32>;
pub type StepRecordF64 = metrics::StepRecord<f64>;
