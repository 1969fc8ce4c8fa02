use ofdm_core::channel::draw_realization;
use ofdm_core::expert::{count_errors, expert_receive, ExpertReceiver};
use ofdm_core::frame::{papr_db, Transmitter};
use ofdm_core::rng::{Domain, Streams};
use ofdm_core::{BitBlock, Channel, ChannelKind, ChannelRealization, ComplexGrid, EqualizerKind, OfdmConfig};
use proptest::prelude::*;

/// Bits, received frames and the per-frame channels of one noisy run.
fn faded(
    cfg: &OfdmConfig,
    kind: ChannelKind,
    frames: usize,
    snr_db: f64,
    seed: u64,
) -> (BitBlock, ComplexGrid, Vec<ChannelRealization>) {
    let streams = Streams::new(seed);
    let bits = BitBlock::random(
        frames,
        cfg.data_cells,
        cfg.mod_order,
        &mut streams.rng(Domain::Bits, 0),
    );
    let tx = Transmitter::new(cfg).unwrap().transmit(&bits).unwrap();
    let mut taps = streams.rng(Domain::Taps, 0);
    let reals: Vec<_> = (0..frames)
        .map(|_| match kind {
            ChannelKind::Awgn => ChannelRealization::identity(),
            _ => draw_realization(kind, cfg, &mut taps).unwrap(),
        })
        .collect();
    let ch = Channel::calibrate(kind, cfg, seed).unwrap();
    let rx = ch.apply(
        &tx,
        cfg.frame_len(),
        Some(&reals),
        &[snr_db],
        &mut streams.rng(Domain::Noise, 0),
    );
    (bits, rx, reals)
}

#[test]
fn perfect_csi_is_error_free_without_noise() {
    for m in 1..=4 {
        let cfg = OfdmConfig::default().with_mod_order(m);
        for kind in [ChannelKind::Awgn, ChannelKind::Flat, ChannelKind::Epa] {
            let (bits, rx, reals) = faded(&cfg, kind, 20, f64::INFINITY, 40 + m as u64);
            let got = expert_receive(&rx, &cfg, EqualizerKind::Perfect, Some(&reals)).unwrap();
            assert_eq!(
                count_errors(&bits, &got, f64::INFINITY).unwrap().bit_errors,
                0,
                "m = {m}, {kind}"
            );
        }
    }
}

#[test]
fn pilot_equalizers_are_error_free_on_noiseless_flat_fading() {
    for m in 1..=4 {
        let cfg = OfdmConfig::default().with_mod_order(m);
        let (bits, rx, _) = faded(&cfg, ChannelKind::Flat, 20, f64::INFINITY, 50 + m as u64);
        for eq in [EqualizerKind::LsLinear, EqualizerKind::LsSpline] {
            let got = expert_receive(&rx, &cfg, eq, None).unwrap();
            assert_eq!(
                count_errors(&bits, &got, f64::INFINITY).unwrap().bit_errors,
                0,
                "m = {m}, {eq}"
            );
        }
        let lmmse = ExpertReceiver::lmmse(&cfg, &[(0, 1.0)], 1e-9).unwrap();
        assert_eq!(
            count_errors(&bits, &lmmse.receive(&rx, None).unwrap(), f64::INFINITY)
                .unwrap()
                .bit_errors,
            0
        );
    }
}

#[test]
fn equalization_helps_on_epa() {
    let cfg = OfdmConfig::default().with_mod_order(2);
    let (bits, rx, reals) = faded(&cfg, ChannelKind::Epa, 200, 25.0, 7);
    let ber = |eq| {
        let got = expert_receive(&rx, &cfg, eq, Some(&reals)).unwrap();
        count_errors(&bits, &got, 25.0).unwrap().ber
    };
    let (none, ls, perfect) = (
        ber(EqualizerKind::None),
        ber(EqualizerKind::LsLinear),
        ber(EqualizerKind::Perfect),
    );
    assert!(
        perfect <= ls && ls < none,
        "perfect {perfect}, ls {ls}, none {none}"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn transmitted_frames_respect_the_papr_limit(seed in any::<u64>(), m in 1usize..=4) {
        let cfg = OfdmConfig::default().with_mod_order(m);
        let bits = BitBlock::random(4, cfg.data_cells, m, &mut Streams::new(seed).rng(Domain::Bits, 0));
        let tx = Transmitter::new(&cfg).unwrap().transmit(&bits).unwrap();
        for frame in tx.as_slice().chunks(cfg.frame_len()) {
            prop_assert!(papr_db(frame) <= cfg.papr_limit_db + 1e-9);
        }
    }
}
