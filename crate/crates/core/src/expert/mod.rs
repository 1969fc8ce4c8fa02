//! Baseline receiver: CP removal, DFT, pilot-based channel estimation,
//! one-tap equalization and minimum-distance demodulation.

mod estimate;
mod interpolate;
mod lmmse;
mod receive;

pub use estimate::{equalize, ls_estimate, ChannelEstimate, Equalized, ERASURE_EPS};
pub use interpolate::{interp_1d, interpolate, Interpolation};
pub use lmmse::{lmmse_estimate, LmmseSmoother};
pub use receive::{count_errors, expert_receive, BerRecord, EqualizerKind, ExpertReceiver};
