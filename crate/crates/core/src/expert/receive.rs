use super::estimate::{equalize, ls_estimate, ChannelEstimate};
use super::interpolate::{interpolate, Interpolation};
use super::lmmse::LmmseSmoother;
use crate::channel::ChannelRealization;
use crate::config::OfdmConfig;
use crate::dft::Fft;
use crate::error::{PhyError, Result};
use crate::frame::{disassemble_frame, remove_cp};
use crate::grid::ComplexGrid;
use crate::layout::FrameLayout;
use crate::modulation::{demodulate_hard, BitBlock};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EqualizerKind {
    None,
    LsLinear,
    LsSpline,
    Lmmse,
    Perfect,
}

impl fmt::Display for EqualizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EqualizerKind::None => "none",
            EqualizerKind::LsLinear => "ls-linear",
            EqualizerKind::LsSpline => "ls-spline",
            EqualizerKind::Lmmse => "lmmse",
            EqualizerKind::Perfect => "perfect",
        })
    }
}

impl FromStr for EqualizerKind {
    type Err = PhyError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(EqualizerKind::None),
            "ls-linear" => Ok(EqualizerKind::LsLinear),
            "ls-spline" => Ok(EqualizerKind::LsSpline),
            "lmmse" => Ok(EqualizerKind::Lmmse),
            "perfect" => Ok(EqualizerKind::Perfect),
            _ => Err(PhyError::Unknown {
                what: "equalizer",
                name: s.to_string(),
            }),
        }
    }
}

/// Expert receiver for one configuration and equalizer choice.
#[derive(Debug, Clone)]
pub struct ExpertReceiver {
    cfg: OfdmConfig,
    layout: FrameLayout,
    fft: Fft,
    equalizer: EqualizerKind,
    lmmse: Option<LmmseSmoother>,
}

impl ExpertReceiver {
    pub fn new(cfg: &OfdmConfig, equalizer: EqualizerKind) -> Result<Self> {
        if equalizer == EqualizerKind::Lmmse {
            return Err(PhyError::MissingContext(
                "lmmse",
                "channel statistics (use ExpertReceiver::lmmse)",
            ));
        }
        Ok(Self {
            layout: FrameLayout::build(cfg)?,
            cfg: cfg.clone(),
            fft: Fft::new(cfg.n_fft),
            equalizer,
            lmmse: None,
        })
    }

    /// LMMSE receiver with prior knowledge of the power-delay profile and
    /// the per-sample noise variance.
    pub fn lmmse(cfg: &OfdmConfig, pdp: &[(usize, f64)], noise_var: f64) -> Result<Self> {
        let layout = FrameLayout::build(cfg)?;
        let smoother = LmmseSmoother::new(pdp, noise_var, &layout, cfg)?;
        Ok(Self {
            layout,
            cfg: cfg.clone(),
            fft: Fft::new(cfg.n_fft),
            equalizer: EqualizerKind::Lmmse,
            lmmse: Some(smoother),
        })
    }

    pub fn equalizer(&self) -> EqualizerKind {
        self.equalizer
    }

    /// CP removal and DFT of `[frames, F, S]` samples; returns `[frames, F, N]`.
    pub fn to_frequency(&self, rx_time: &ComplexGrid) -> Result<ComplexGrid> {
        let cfg = &self.cfg;
        if rx_time.row_len() != cfg.sym_len || rx_time.len() % cfg.frame_len() != 0 {
            return Err(PhyError::shape(&[cfg.frame_syms, cfg.sym_len], rx_time.dims()));
        }
        let frames = rx_time.len() / cfg.frame_len();
        let mut freq = remove_cp(rx_time, cfg)?.reshape(&[frames, cfg.frame_syms, cfg.n_fft])?;
        self.fft.process(freq.as_mut_slice(), false);
        Ok(freq)
    }

    fn estimate(&self, y: &ComplexGrid, realization: Option<&ChannelRealization>) -> Result<ChannelEstimate> {
        let (cfg, layout) = (&self.cfg, &self.layout);
        match self.equalizer {
            EqualizerKind::None => unreachable!("no estimate needed"),
            EqualizerKind::Perfect => {
                let r = realization.ok_or(PhyError::MissingContext("perfect", "channel realizations"))?;
                Ok(ChannelEstimate::from_response(
                    &r.frequency_response(cfg.n_fft),
                    layout,
                    cfg,
                ))
            }
            EqualizerKind::LsLinear => interpolate(
                &ls_estimate(y, layout, cfg)?,
                Interpolation::Linear2d,
                layout,
                cfg,
            ),
            EqualizerKind::LsSpline => interpolate(
                &ls_estimate(y, layout, cfg)?,
                Interpolation::Spline2d,
                layout,
                cfg,
            ),
            EqualizerKind::Lmmse => {
                let ls = interpolate(
                    &ls_estimate(y, layout, cfg)?,
                    Interpolation::Linear2d,
                    layout,
                    cfg,
                )?;
                self.lmmse
                    .as_ref()
                    .expect("built by ExpertReceiver::lmmse")
                    .smooth(&ls)
            }
        }
    }

    /// Equalized data-cell points, dims `[frames, D]`.
    pub fn data_points(
        &self,
        rx_time: &ComplexGrid,
        realizations: Option<&[ChannelRealization]>,
    ) -> Result<ComplexGrid> {
        let cfg = &self.cfg;
        let freq = self.to_frequency(rx_time)?;
        let per_frame = cfg.frame_syms * cfg.n_fft;
        let frames = freq.len() / per_frame;
        let mut points = Vec::with_capacity(frames * cfg.data_cells);
        for (f, chunk) in freq.as_slice().chunks_exact(per_frame).enumerate() {
            let y = ComplexGrid::from_complex(&[cfg.frame_syms, cfg.n_fft], chunk.to_vec())?;
            let eq = if self.equalizer == EqualizerKind::None {
                y
            } else {
                let est = self.estimate(&y, realizations.map(|r| &r[f]))?;
                equalize(&y, &est)?.grid
            };
            let (data, _) = disassemble_frame(&eq, &self.layout, cfg)?;
            points.extend_from_slice(data.as_slice());
        }
        ComplexGrid::from_complex(&[frames, cfg.data_cells], points)
    }

    /// Hard-decision bits for every frame of `[frames, F, S]` samples.
    pub fn receive(
        &self,
        rx_time: &ComplexGrid,
        realizations: Option<&[ChannelRealization]>,
    ) -> Result<BitBlock> {
        let points = self.data_points(rx_time, realizations)?;
        demodulate_hard(&points, self.cfg.mod_order)
    }
}

/// remove CP -> DFT -> equalize -> slice, for one receiver setup.
pub fn expert_receive(
    rx_time: &ComplexGrid,
    cfg: &OfdmConfig,
    equalizer: EqualizerKind,
    realizations: Option<&[ChannelRealization]>,
) -> Result<BitBlock> {
    ExpertReceiver::new(cfg, equalizer)?.receive(rx_time, realizations)
}

/// One row of a BER curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerRecord {
    pub snr_db: f64,
    pub bits_tested: u64,
    pub bit_errors: u64,
    pub ber: f64,
}

impl BerRecord {
    pub fn new(snr_db: f64, bits_tested: u64, bit_errors: u64) -> Self {
        let ber = if bits_tested == 0 {
            0.0
        } else {
            bit_errors as f64 / bits_tested as f64
        };
        Self {
            snr_db,
            bits_tested,
            bit_errors,
            ber,
        }
    }

    pub fn merge(&self, other: &BerRecord) -> BerRecord {
        BerRecord::new(
            self.snr_db,
            self.bits_tested + other.bits_tested,
            self.bit_errors + other.bit_errors,
        )
    }

    /// Standard deviation of the binomial BER estimate.
    pub fn std_error(&self) -> f64 {
        if self.bits_tested == 0 {
            return 0.0;
        }
        (self.ber * (1.0 - self.ber) / self.bits_tested as f64).sqrt()
    }
}

/// Exact Hamming comparison of two equally shaped bit blocks.
pub fn count_errors(tx: &BitBlock, rx: &BitBlock, snr_db: f64) -> Result<BerRecord> {
    if tx.shape() != rx.shape() {
        return Err(PhyError::shape(&tx.shape(), &rx.shape()));
    }
    let errors = tx
        .as_slice()
        .iter()
        .zip(rx.as_slice())
        .filter(|(a, b)| a != b)
        .count();
    Ok(BerRecord::new(snr_db, tx.as_slice().len() as u64, errors as u64))
}
