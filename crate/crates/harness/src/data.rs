//! Seeded generation of transmitted bits and received frames.

use ofdm_core::channel::draw_realization;
use ofdm_core::frame::Transmitter;
use ofdm_core::rng::{Domain, Streams};
use ofdm_core::{BitBlock, Channel, ChannelKind, ChannelRealization, ComplexGrid, OfdmConfig, Result};

/// One block of frames with everything a receiver may be scored against.
#[derive(Debug, Clone)]
pub struct Batch {
    pub bits: BitBlock,
    /// `[frames, F, S]` received samples.
    pub rx: ComplexGrid,
    /// One realization per frame; unit taps on AWGN.
    pub realizations: Vec<ChannelRealization>,
}

/// Transmitter plus calibrated channel.
#[derive(Debug, Clone)]
pub struct Generator {
    cfg: OfdmConfig,
    tx: Transmitter,
    channel: Channel,
}

impl Generator {
    /// Calibrates the noise reference once from `seed`.
    pub fn new(cfg: &OfdmConfig, kind: ChannelKind, seed: u64) -> Result<Self> {
        Ok(Self {
            cfg: cfg.clone(),
            tx: Transmitter::new(cfg)?,
            channel: Channel::calibrate(kind, cfg, seed)?,
        })
    }

    pub fn config(&self) -> &OfdmConfig {
        &self.cfg
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    /// Block `index` of the stream family `streams`; frame `i` sees channel
    /// SNR `snr_db[i % snr_db.len()]`.
    pub fn batch(&self, streams: &Streams, index: u64, frames: usize, snr_db: &[f64]) -> Result<Batch> {
        let cfg = &self.cfg;
        let bits = BitBlock::random(
            frames,
            cfg.data_cells,
            cfg.mod_order,
            &mut streams.rng(Domain::Bits, index),
        );
        let tx = self.tx.transmit(&bits)?;
        let kind = self.channel.kind();
        let realizations: Vec<ChannelRealization> = if kind.is_fading() {
            let mut taps = streams.rng(Domain::Taps, index);
            (0..frames)
                .map(|_| draw_realization(kind, cfg, &mut taps))
                .collect::<Result<_>>()?
        } else {
            vec![ChannelRealization::identity(); frames]
        };
        let fading = kind.is_fading().then_some(realizations.as_slice());
        let rx = self.channel.apply(
            &tx,
            cfg.frame_len(),
            fading,
            snr_db,
            &mut streams.rng(Domain::Noise, index),
        );
        Ok(Batch {
            bits,
            rx,
            realizations,
        })
    }
}
