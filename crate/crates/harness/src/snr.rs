//! Conversion between the channel SNR (per time-domain sample) and Eb/N0.
//!
//! Eb is the mean energy of one data bit on a frequency-domain data cell,
//! `Es / m`; N0 is the per-sample noise variance, which the unitary DFT
//! carries unchanged onto each subcarrier. With calibrated signal power
//! `P`, `Eb/N0 = SNR * Es / (m * P)`.

use ofdm_core::{Constellation, OfdmConfig, Result};

/// `EbNo_dB - SNR_dB` for the given calibrated reference power.
pub fn ebno_offset_db(cfg: &OfdmConfig, reference_power: f64) -> Result<f64> {
    let es = Constellation::new(cfg.mod_order)?.mean_energy();
    Ok(10.0 * (es / (cfg.mod_order as f64 * reference_power)).log10())
}

pub fn snr_from_ebno(ebno_db: f64, offset_db: f64) -> f64 {
    ebno_db - offset_db
}

pub fn ebno_from_snr(snr_db: f64, offset_db: f64) -> f64 {
    snr_db + offset_db
}
