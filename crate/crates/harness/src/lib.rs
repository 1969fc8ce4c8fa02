//! Experiment harness for the learned OFDM receiver: two-stage training,
//! BER sweeps of learned and expert receivers, waveform file exchange and
//! run configuration.

pub mod data;
mod error;
pub mod eval;
pub mod manifest;
pub mod plan;
pub mod settings;
pub mod snr;
pub mod train;
pub mod waveform;

pub use data::{Batch, Generator};
pub use error::{LabError, Result};
pub use eval::{evaluate, parse_csv, write_csv, Detector};
pub use plan::{Stage, SweepPlan, TrainPlan};
pub use settings::Settings;
pub use train::{train_stage1, train_stage2, EpisodeStats, TrainOutcome};
pub use waveform::{cross_validate, WaveformFile};
