//! Learned OFDM receiver and equalizer networks built on `cxnn`.
//!
//! The basic receiver maps one received time-domain frame `[F, S, 2]` to
//! soft bits `[D, m, 2]`. The equalizer maps a frame to a frame of the same
//! shape, so that it can sit in front of a trained receiver whose
//! parameters stay fixed while the equalizer learns.

pub mod adapt;
pub mod checkpoint;
pub mod composite;
pub mod config;
pub mod equalizer;
mod error;
pub mod ls;
pub mod model;
pub mod receiver;

pub use checkpoint::{build_model, Checkpoint, ModelKind};
pub use composite::{build_composite, composite_logits, load_receiver, RECEIVER_PREFIX};
pub use config::{DccnConfig, EstInput, Variant};
pub use equalizer::build_equalizer;
pub use error::{DccnError, Result};
pub use model::DccnModel;
pub use receiver::build_receiver;
