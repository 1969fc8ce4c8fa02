//! Tapped-delay-line channels: AWGN, flat Rayleigh and 3GPP EPA multipath.
//!
//! Fading is slow: one tap set per frame. Noise power is calibrated against
//! the mean transmit power of a 64-frame reference batch drawn once per run.

use crate::config::OfdmConfig;
use crate::error::{PhyError, Result};
use crate::frame::Transmitter;
use crate::grid::ComplexGrid;
use crate::modulation::BitBlock;
use crate::rng::{Domain, Streams};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// 3GPP EPA excess tap delays (ns).
pub const EPA_DELAYS_NS: [f64; 7] = [0.0, 30.0, 70.0, 90.0, 110.0, 190.0, 410.0];
/// 3GPP EPA relative tap powers (dB).
pub const EPA_POWERS_DB: [f64; 7] = [0.0, -1.0, -2.0, -3.0, -8.0, -17.2, -20.8];

/// Frames in the noise calibration batch.
pub const CALIBRATION_FRAMES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Awgn,
    Flat,
    Epa,
}

impl ChannelKind {
    pub fn is_fading(self) -> bool {
        !matches!(self, ChannelKind::Awgn)
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelKind::Awgn => "awgn",
            ChannelKind::Flat => "flat",
            ChannelKind::Epa => "epa",
        })
    }
}

impl FromStr for ChannelKind {
    type Err = PhyError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "awgn" => Ok(ChannelKind::Awgn),
            "flat" => Ok(ChannelKind::Flat),
            "epa" => Ok(ChannelKind::Epa),
            _ => Err(PhyError::Unknown {
                what: "channel kind",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub kind: ChannelKind,
    pub snr_db: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub delay: usize,
    pub gain: Complex64,
}

/// One frame's channel impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    taps: Vec<Tap>,
}

impl ChannelRealization {
    pub fn new(taps: Vec<Tap>) -> Self {
        Self { taps }
    }

    /// Unit gain at delay 0.
    pub fn identity() -> Self {
        Self::new(vec![Tap {
            delay: 0,
            gain: Complex64::new(1.0, 0.0),
        }])
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn power(&self) -> f64 {
        self.taps.iter().map(|t| t.gain.norm_sqr()).sum()
    }

    pub fn max_delay(&self) -> usize {
        self.taps.iter().map(|t| t.delay).max().unwrap_or(0)
    }

    /// `H_k = sum_i g_i exp(-2 pi i k d_i / n)` for DFT bins `k = 0..n`.
    pub fn frequency_response(&self, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|k| {
                self.taps
                    .iter()
                    .map(|t| {
                        let phase = -2.0 * PI * ((k * t.delay) % n) as f64 / n as f64;
                        t.gain * Complex64::from_polar(1.0, phase)
                    })
                    .sum()
            })
            .collect()
    }

    /// Truncated linear convolution of one serialized frame, in place.
    pub fn convolve(&self, frame: &mut [Complex64]) {
        if let [tap] = self.taps.as_slice() {
            if tap.delay == 0 {
                frame.iter_mut().for_each(|z| *z *= tap.gain);
                return;
            }
        }
        let input = frame.to_vec();
        for (n, y) in frame.iter_mut().enumerate() {
            *y = self
                .taps
                .iter()
                .filter(|t| t.delay <= n)
                .map(|t| t.gain * input[n - t.delay])
                .sum();
        }
    }
}

/// Frequency response on the natural-order DFT bins, dims `[N]`.
pub fn true_frequency_response(realization: &ChannelRealization, cfg: &OfdmConfig) -> ComplexGrid {
    ComplexGrid::from_complex(&[cfg.n_fft], realization.frequency_response(cfg.n_fft)).expect("length n_fft")
}

/// Power-delay profile `(delay in samples, mean power)` with unit total power.
/// Paths that round to the same sample delay are merged.
pub fn power_delay_profile(kind: ChannelKind, cfg: &OfdmConfig) -> Result<Vec<(usize, f64)>> {
    match kind {
        ChannelKind::Awgn => Err(PhyError::NoFading),
        ChannelKind::Flat => Ok(vec![(0, 1.0)]),
        ChannelKind::Epa => {
            let ns_per_sample = 1e9 / cfg.sample_rate_hz;
            let mut pdp: Vec<(usize, f64)> = Vec::new();
            for (d, p) in EPA_DELAYS_NS.iter().zip(EPA_POWERS_DB) {
                let delay = (d / ns_per_sample).round() as usize;
                let power = 10f64.powf(p / 10.0);
                match pdp.iter_mut().find(|(dd, _)| *dd == delay) {
                    Some(entry) => entry.1 += power,
                    None => pdp.push((delay, power)),
                }
            }
            let total: f64 = pdp.iter().map(|(_, p)| p).sum();
            pdp.iter_mut().for_each(|(_, p)| *p /= total);
            Ok(pdp)
        }
    }
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// Rayleigh taps drawn on the unit-power profile of `kind`.
pub fn draw_realization<R: Rng + ?Sized>(
    kind: ChannelKind,
    cfg: &OfdmConfig,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let pdp = power_delay_profile(kind, cfg)?;
    let taps = pdp
        .into_iter()
        .map(|(delay, p)| Tap {
            delay,
            gain: complex_gaussian(rng, p),
        })
        .collect();
    Ok(ChannelRealization::new(taps))
}

/// Draws the realization for `spec.seed` (stream 0 of the tap domain).
pub fn draw_channel(spec: &ChannelSpec, cfg: &OfdmConfig) -> Result<ChannelRealization> {
    let mut rng = Streams::new(spec.seed).rng(Domain::Taps, 0);
    draw_realization(spec.kind, cfg, &mut rng)
}

pub fn add_noise<R: Rng + ?Sized>(samples: &mut [Complex64], noise_var: f64, rng: &mut R) {
    if noise_var <= 0.0 {
        return;
    }
    for z in samples {
        *z += complex_gaussian(rng, noise_var);
    }
}

/// A channel with its calibrated reference signal power.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    kind: ChannelKind,
    reference_power: f64,
}

impl Channel {
    pub fn with_reference_power(kind: ChannelKind, reference_power: f64) -> Self {
        Self {
            kind,
            reference_power,
        }
    }

    /// Measures the mean per-sample transmit power of a
    /// [`CALIBRATION_FRAMES`]-frame batch of random data.
    pub fn calibrate(kind: ChannelKind, cfg: &OfdmConfig, seed: u64) -> Result<Self> {
        let tx = Transmitter::new(cfg)?;
        let mut rng = Streams::new(seed).rng(Domain::Calibration, 0);
        let bits = BitBlock::random(CALIBRATION_FRAMES, cfg.data_cells, cfg.mod_order, &mut rng);
        let frames = tx.transmit(&bits)?;
        Ok(Self::with_reference_power(kind, frames.mean_power()))
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn reference_power(&self) -> f64 {
        self.reference_power
    }

    /// Per-sample complex noise variance for a time-domain SNR.
    pub fn noise_variance(&self, snr_db: f64) -> f64 {
        if snr_db == f64::INFINITY {
            0.0
        } else {
            self.reference_power / 10f64.powf(snr_db / 10.0)
        }
    }

    /// Fades (if a realization is given) and adds noise to each frame of a
    /// `[frames, F, S]` grid. `realizations` holds one entry per frame.
    pub fn apply<R: Rng + ?Sized>(
        &self,
        tx: &ComplexGrid,
        frame_len: usize,
        realizations: Option<&[ChannelRealization]>,
        snr_db: &[f64],
        rng: &mut R,
    ) -> ComplexGrid {
        let mut out = tx.clone();
        for (f, frame) in out.as_mut_slice().chunks_mut(frame_len).enumerate() {
            if let Some(r) = realizations {
                r[f].convolve(frame);
            }
            add_noise(frame, self.noise_variance(snr_db[f % snr_db.len()]), rng);
        }
        out
    }
}

/// `y = x * h + n` for one time-domain frame (`[F, S]` or `[1, F, S]`).
/// The noise reference power is calibrated from `spec.seed`; noise is drawn
/// from the same seed's noise stream 0.
pub fn apply_channel(
    tx: &ComplexGrid,
    realization: Option<&ChannelRealization>,
    spec: &ChannelSpec,
    cfg: &OfdmConfig,
) -> Result<ComplexGrid> {
    if tx.len() % cfg.frame_len() != 0 {
        return Err(PhyError::shape(&[cfg.frame_syms, cfg.sym_len], tx.dims()));
    }
    let ch = Channel::calibrate(spec.kind, cfg, spec.seed)?;
    let mut rng = Streams::new(spec.seed).rng(Domain::Noise, 0);
    let frames = tx.len() / cfg.frame_len();
    let reals: Option<Vec<ChannelRealization>> = match spec.kind {
        ChannelKind::Awgn => None,
        _ => Some(vec![
            realization.cloned().ok_or(PhyError::MissingContext(
                "fading channel",
                "a realization",
            ))?;
            frames
        ]),
    };
    Ok(ch.apply(tx, cfg.frame_len(), reals.as_deref(), &[spec.snr_db], &mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dft::dft_reference;
    use crate::frame::{remove_cp, transmit};
    use crate::layout::FrameLayout;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> OfdmConfig {
        OfdmConfig::default()
    }

    fn random_frame(seed: u64) -> ComplexGrid {
        let c = cfg();
        let layout = FrameLayout::build(&c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits = BitBlock::random(1, 368, 2, &mut rng);
        transmit(&bits, &c, &layout).unwrap()
    }

    #[test]
    fn flat_has_one_tap() {
        let spec = ChannelSpec {
            kind: ChannelKind::Flat,
            snr_db: 10.0,
            seed: 3,
        };
        let r = draw_channel(&spec, &cfg()).unwrap();
        assert_eq!(r.taps().len(), 1);
        assert_eq!(r.taps()[0].delay, 0);
    }

    #[test]
    fn profiles_have_unit_power() {
        for kind in [ChannelKind::Flat, ChannelKind::Epa] {
            let pdp = power_delay_profile(kind, &cfg()).unwrap();
            let total: f64 = pdp.iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_tap_power_is_unity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in [ChannelKind::Flat, ChannelKind::Epa] {
            let n = 20_000;
            let mean: f64 = (0..n)
                .map(|_| draw_realization(kind, &cfg(), &mut rng).unwrap().power())
                .sum::<f64>()
                / n as f64;
            assert!((mean - 1.0).abs() < 0.03, "{kind}: {mean}");
        }
    }

    #[test]
    fn epa_delays_fit_in_cp() {
        let pdp = power_delay_profile(ChannelKind::Epa, &cfg()).unwrap();
        let delays: Vec<usize> = pdp.iter().map(|(d, _)| *d).collect();
        assert_eq!(delays, vec![0, 1, 2, 4]);
        let spec = ChannelSpec {
            kind: ChannelKind::Epa,
            snr_db: 0.0,
            seed: 9,
        };
        let r = draw_channel(&spec, &cfg()).unwrap();
        assert_eq!(r.max_delay(), 4);
        assert!(r.max_delay() < cfg().cp_len);
    }

    #[test]
    fn draws_are_deterministic() {
        let spec = ChannelSpec {
            kind: ChannelKind::Epa,
            snr_db: 0.0,
            seed: 77,
        };
        assert_eq!(
            draw_channel(&spec, &cfg()).unwrap(),
            draw_channel(&spec, &cfg()).unwrap()
        );
    }

    #[test]
    fn awgn_has_no_realization() {
        let spec = ChannelSpec {
            kind: ChannelKind::Awgn,
            snr_db: 0.0,
            seed: 1,
        };
        assert_eq!(draw_channel(&spec, &cfg()).unwrap_err(), PhyError::NoFading);
    }

    #[test]
    fn infinite_snr_awgn_is_identity() {
        let x = random_frame(1);
        let spec = ChannelSpec {
            kind: ChannelKind::Awgn,
            snr_db: f64::INFINITY,
            seed: 1,
        };
        assert_eq!(apply_channel(&x, None, &spec, &cfg()).unwrap(), x);
    }

    #[test]
    fn noiseless_flat_scales_frame() {
        let x = random_frame(2);
        let g = Complex64::new(0.3, -0.8);
        let r = ChannelRealization::new(vec![Tap { delay: 0, gain: g }]);
        let spec = ChannelSpec {
            kind: ChannelKind::Flat,
            snr_db: f64::INFINITY,
            seed: 1,
        };
        let y = apply_channel(&x, Some(&r), &spec, &cfg()).unwrap();
        for (a, b) in x.as_slice().iter().zip(y.as_slice()) {
            assert_eq!(*b, a * g);
        }
    }

    #[test]
    fn shifted_delta_response() {
        let r = ChannelRealization::new(vec![Tap {
            delay: 3,
            gain: Complex64::new(1.0, 0.0),
        }]);
        let h = r.frequency_response(64);
        for (k, z) in h.iter().enumerate() {
            assert!((z.norm() - 1.0).abs() < 1e-12);
            let expect = Complex64::from_polar(1.0, -2.0 * PI * 3.0 * k as f64 / 64.0);
            assert!((z - expect).norm() < 1e-12);
        }
        let unit = true_frequency_response(&ChannelRealization::identity(), &cfg());
        assert!(unit.as_slice().iter().all(|z| (z - 1.0).norm() < 1e-15));
    }

    #[test]
    fn epa_frequency_ratio_matches_response() {
        let c = cfg();
        let x = random_frame(3);
        let spec = ChannelSpec {
            kind: ChannelKind::Epa,
            snr_db: f64::INFINITY,
            seed: 21,
        };
        let r = draw_channel(&spec, &c).unwrap();
        let y = apply_channel(&x, Some(&r), &spec, &c).unwrap();
        // Oracle: reference DFT of the zero-padded tap vector, scaled by sqrt(N).
        let mut taps = ComplexGrid::zeros(&[64]);
        for t in r.taps() {
            taps.as_mut_slice()[t.delay] += t.gain;
        }
        let h: Vec<Complex64> = dft_reference(&taps, false)
            .as_slice()
            .iter()
            .map(|z| z * 8.0)
            .collect();
        let xf = dft_reference(&remove_cp(&x.reshape(&[8, 80]).unwrap(), &c).unwrap(), false);
        let yf = dft_reference(&remove_cp(&y.reshape(&[8, 80]).unwrap(), &c).unwrap(), false);
        for sym in 0..8 {
            for k in 0..64 {
                let xi = xf.as_slice()[sym * 64 + k];
                if xi.norm() < 1e-3 {
                    continue;
                }
                let ratio = yf.as_slice()[sym * 64 + k] / xi;
                assert!((ratio - h[k]).norm() < 1e-8, "sym {sym} bin {k}");
            }
        }
    }

    #[test]
    fn noise_calibration_hits_requested_snr() {
        let c = cfg();
        let ch = Channel::calibrate(ChannelKind::Awgn, &c, 99).unwrap();
        let tx = Transmitter::new(&c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for snr in [-5.0, 0.0, 7.0, 20.0] {
            let bits = BitBlock::random(64, 368, 2, &mut rng);
            let x = tx.transmit(&bits).unwrap();
            let y = ch.apply(&x, c.frame_len(), None, &[snr], &mut rng);
            let noise: f64 = x
                .as_slice()
                .iter()
                .zip(y.as_slice())
                .map(|(a, b)| (b - a).norm_sqr())
                .sum::<f64>()
                / x.len() as f64;
            let measured = 10.0 * (x.mean_power() / noise).log10();
            assert!((measured - snr).abs() < 0.2, "snr {snr}: {measured}");
        }
    }

    #[test]
    fn isi_stays_inside_cp() {
        // A pulse at the last sample of symbol 0 leaks at most max_delay
        // samples into symbol 1, all inside its CP.
        let c = cfg();
        let pdp = power_delay_profile(ChannelKind::Epa, &c).unwrap();
        let taps = pdp
            .iter()
            .map(|&(delay, p)| Tap {
                delay,
                gain: Complex64::new(p.sqrt(), 0.0),
            })
            .collect();
        let r = ChannelRealization::new(taps);
        let mut frame = vec![Complex64::new(0.0, 0.0); c.frame_len()];
        frame[c.sym_len - 1] = Complex64::new(1.0, 0.0);
        r.convolve(&mut frame);
        let leak: Vec<usize> = (c.sym_len..2 * c.sym_len)
            .filter(|&i| frame[i].norm() > 0.0)
            .collect();
        assert!(!leak.is_empty());
        assert!(leak.iter().all(|&i| i < c.sym_len + c.cp_len));
    }
}
