//! Baseband OFDM physical layer: a scattered-pilot transmitter, tapped delay
//! line fading channels with calibrated AWGN, and an expert receiver with
//! LS/LMMSE channel estimation.
//!
//! All frequency-domain grids are stored in natural DFT bin order. The frame
//! layout is described in FFT-shifted subcarrier coordinates and converted
//! with [`OfdmConfig::bin_of`].

pub mod channel;
pub mod config;
pub mod dft;
mod error;
pub mod expert;
pub mod frame;
pub mod grid;
pub mod layout;
pub mod modulation;
pub mod rng;

pub use channel::{Channel, ChannelKind, ChannelRealization, ChannelSpec};
pub use config::OfdmConfig;
pub use error::{PhyError, Result};
pub use expert::{BerRecord, ChannelEstimate, EqualizerKind, Interpolation};
pub use grid::ComplexGrid;
pub use layout::{Cell, CellRole, FrameLayout};
pub use modulation::{BitBlock, Constellation};

pub use num_complex::Complex64;
