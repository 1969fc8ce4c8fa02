use cxnn::loss::{soft_bit_loss, LossConfig};
use cxnn::{Adam, AdamConfig, Graph, Mode};
use dccn::adapt::frames_to_tensor;
use dccn::ls::ls_equalizer;
use dccn::{
    build_composite, build_receiver, composite_logits, load_receiver, Checkpoint, DccnConfig, DccnModel,
    ModelKind, Variant,
};
use ofdm_core::channel::draw_realization;
use ofdm_core::dft::{dft_matrix, dft_reference, Fft};
use ofdm_core::expert::{equalize, interpolate, ls_estimate};
use ofdm_core::frame::{add_cp, remove_cp, Transmitter};
use ofdm_core::rng::{Domain, Streams};
use ofdm_core::{BitBlock, Channel, ChannelKind, ComplexGrid, FrameLayout, Interpolation, OfdmConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Noiseless EPA frames `[frames, F, S]`.
fn epa_frames(cfg: &OfdmConfig, frames: usize, seed: u64) -> ComplexGrid {
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
        .map(|_| draw_realization(ChannelKind::Epa, cfg, &mut taps).unwrap())
        .collect();
    let ch = Channel::with_reference_power(ChannelKind::Epa, 1.0);
    ch.apply(
        &tx,
        cfg.frame_len(),
        Some(&reals),
        &[f64::INFINITY],
        &mut streams.rng(Domain::Noise, 0),
    )
}

/// CP removal, DFT, LS estimate, linear interpolation, one-tap equalizer.
fn expert_equalized(frame: &ComplexGrid, cfg: &OfdmConfig, layout: &FrameLayout) -> ComplexGrid {
    let fft = Fft::new(cfg.n_fft);
    let y = fft.transform(&remove_cp(frame, cfg).unwrap(), false);
    let est = interpolate(
        &ls_estimate(&y, layout, cfg).unwrap(),
        Interpolation::Linear2d,
        layout,
        cfg,
    )
    .unwrap();
    equalize(&y, &est).unwrap().grid
}

#[test]
fn hand_set_equalizer_matches_ls_pipeline() {
    let ofdm = OfdmConfig::default();
    let layout = FrameLayout::build(&ofdm).unwrap();
    let fft = Fft::new(ofdm.n_fft);
    for use_cp in [false, true] {
        let mut dc = DccnConfig::new(ofdm.clone(), use_cp);
        dc.div_eps = 1e-14;
        let g = ls_equalizer(&dc).unwrap();
        let rx = epa_frames(&ofdm, 50, 31);
        let tape = g
            .forward(&frames_to_tensor::<f64>(&rx, &ofdm).unwrap(), Mode::Eval)
            .unwrap();
        let eq_node = tape.value(g.find("equalization").unwrap());
        let (mut worst_eq, mut worst_out) = (0.0f64, 0.0f64);
        for (f, frame) in rx.as_slice().chunks(ofdm.frame_len()).enumerate() {
            let frame = ComplexGrid::from_complex(&[ofdm.frame_syms, ofdm.sym_len], frame.to_vec()).unwrap();
            let expert = expert_equalized(&frame, &ofdm, &layout);
            let per = 2 * ofdm.frame_syms * ofdm.n_fft;
            worst_eq = worst_eq.max(max_abs_diff(
                &eq_node.data()[f * per..(f + 1) * per],
                expert.as_reals(),
            ));
            let time = add_cp(&fft.transform(&expert, true), &ofdm).unwrap();
            let per = 2 * ofdm.frame_len();
            worst_out = worst_out.max(max_abs_diff(
                &tape.output().data()[f * per..(f + 1) * per],
                time.as_reals(),
            ));
        }
        assert!(worst_eq < 1e-4, "cp {use_cp}: equalized grid off by {worst_eq}");
        assert!(worst_out < 1e-4, "cp {use_cp}: output frame off by {worst_out}");
    }
}

fn interleave(z: &[ofdm_core::Complex64]) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

/// Sets the input batch norm to the identity in evaluation mode.
fn identity_bn(g: &mut Graph<f64>, eps: f64) {
    g.param_mut("input_bn/moving_var").unwrap().values = vec![1.0 - eps; 2];
}

#[test]
fn dft_like_layers_hold_the_unitary_dft() {
    let ofdm = OfdmConfig::default();
    let (f, n) = (ofdm.frame_syms, ofdm.n_fft);
    let rx = epa_frames(&ofdm, 3, 5);
    let x = frames_to_tensor::<f64>(&rx, &ofdm).unwrap();
    let want = dft_reference(&remove_cp(&rx, &ofdm).unwrap(), false);
    let w = interleave(&dft_matrix(n, false));

    let dc = DccnConfig::new(ofdm.clone(), false);
    let mut conv = build_receiver::<f64>(&dc).unwrap();
    identity_bn(&mut conv, dc.norm_eps);
    conv.param_mut("dft_like/w").unwrap().values = w.clone();
    let tape = conv.forward(&x, Mode::Eval).unwrap();
    let got = tape.value(conv.find("dft_like").unwrap());
    assert!(max_abs_diff(got.data(), want.as_reals()) < 1e-6);

    let mut dense = build_receiver::<f64>(&dc.clone().with_variant(Variant::A)).unwrap();
    identity_bn(&mut dense, dc.norm_eps);
    let block = cxnn::conv1d_real_embedding(&w, n, n);
    let width = 2 * f * n;
    let mut big = vec![0.0; width * width];
    for s in 0..f {
        for r in 0..2 * n {
            for c in 0..2 * n {
                big[(s * 2 * n + r) * width + s * 2 * n + c] = block[r * 2 * n + c];
            }
        }
    }
    dense.param_mut("dft_like/w").unwrap().values = big;
    let tape = dense.forward(&x, Mode::Eval).unwrap();
    let got = tape.value(dense.find("dft_like").unwrap());
    assert!(max_abs_diff(got.data(), want.as_reals()) < 1e-6);
}

#[test]
fn variant_a_parameter_count() {
    let ofdm = OfdmConfig::default();
    for use_cp in [false, true] {
        let dc = DccnConfig::new(ofdm.clone(), use_cp);
        let w = dc.symbol_width();
        let (f, n) = (ofdm.frame_syms, ofdm.n_fft);
        let original = build_receiver::<f32>(&dc).unwrap().param_count();
        let a = build_receiver::<f32>(&dc.clone().with_variant(Variant::A))
            .unwrap()
            .param_count();
        assert_eq!(a, original - 2 * n * w + (2 * f * w) * (2 * f * n));
    }
}

#[test]
fn variant_e_equals_original_on_positive_preactivations() {
    let dc = DccnConfig::new(OfdmConfig::default().with_mod_order(2), false);
    let mut orig = build_receiver::<f64>(&dc).unwrap();
    orig.initialize(&mut ChaCha8Rng::seed_from_u64(4));
    orig.param_mut("demod/b").unwrap().values = vec![50.0; 4];
    let mut e = build_receiver::<f64>(&dc.clone().with_variant(Variant::E)).unwrap();
    for p in orig.params() {
        e.param_mut(&p.name).unwrap().values.clone_from(&p.values);
    }
    let x = frames_to_tensor::<f64>(&epa_frames(&dc.ofdm, 2, 8), &dc.ofdm).unwrap();
    let t = orig.forward(&x, Mode::Eval).unwrap();
    assert!(t
        .value(orig.find("demod").unwrap())
        .data()
        .iter()
        .all(|v| *v > 0.0));
    assert_eq!(t.output().data(), e.infer(&x).unwrap().data());
}

#[test]
fn random_receiver_outputs_normalized_soft_bits() {
    for m in 1..=4 {
        let dc = DccnConfig::new(OfdmConfig::default().with_mod_order(m), m % 2 == 0);
        let mut g = build_receiver::<f32>(&dc).unwrap();
        g.initialize(&mut ChaCha8Rng::seed_from_u64(m as u64));
        let x = frames_to_tensor::<f32>(&epa_frames(&dc.ofdm, 2, 1), &dc.ofdm).unwrap();
        let y = g.forward(&x, Mode::Train).unwrap().into_output();
        assert_eq!(y.shape(), &[2, 368, m, 2]);
        for pair in y.data().chunks(2) {
            assert!(pair[0].is_finite() && pair[1].is_finite());
            assert!((pair[0] + pair[1] - 1.0).abs() < 1e-5);
        }
    }
}

#[test]
fn checkpoint_file_round_trip_is_bit_exact() {
    let dc = DccnConfig::new(OfdmConfig::default().with_mod_order(2), true);
    let mut g = build_composite::<f32>(&dc).unwrap();
    g.initialize(&mut ChaCha8Rng::seed_from_u64(12));
    let ck = Checkpoint::new(ModelKind::Composite, dc.clone(), 12, 0, g);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.dccn");
    ck.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back.to_bytes(), std::fs::read(&path).unwrap());

    let rx = epa_frames(&dc.ofdm, 3, 2);
    let a = DccnModel::new(ck).soft_bits(&rx).unwrap();
    let b = DccnModel::new(back).soft_bits(&rx).unwrap();
    assert_eq!(a.data(), b.data());
}

#[test]
fn receiver_checkpoint_loads_into_composite_and_stays_frozen() {
    let dc = DccnConfig::new(OfdmConfig::default().with_mod_order(1), false);
    let mut receiver = build_receiver::<f32>(&dc).unwrap();
    receiver.initialize(&mut ChaCha8Rng::seed_from_u64(3));
    let bytes = Checkpoint::new(ModelKind::Receiver, dc.clone(), 3, 1, receiver).to_bytes();
    let base = Checkpoint::from_bytes(&bytes).unwrap();

    let mut g = build_composite::<f32>(&dc).unwrap();
    g.initialize(&mut ChaCha8Rng::seed_from_u64(4));
    load_receiver(&mut g, &base.graph).unwrap();
    let logits = composite_logits(&g).unwrap();
    let mut adam = Adam::new(&g, AdamConfig::default());
    let streams = Streams::new(5);
    let tx = Transmitter::new(&dc.ofdm).unwrap();
    let ch = Channel::calibrate(ChannelKind::Flat, &dc.ofdm, 5).unwrap();
    for step in 0..5u64 {
        let bits = BitBlock::random(4, 368, 1, &mut streams.rng(Domain::Bits, step));
        let mut taps = streams.rng(Domain::Taps, step);
        let reals: Vec<_> = (0..4)
            .map(|_| draw_realization(ChannelKind::Flat, &dc.ofdm, &mut taps).unwrap())
            .collect();
        let rx = ch.apply(
            &tx.transmit(&bits).unwrap(),
            dc.ofdm.frame_len(),
            Some(&reals),
            &[10.0],
            &mut streams.rng(Domain::Noise, step),
        );
        let tape = g
            .forward(&frames_to_tensor(&rx, &dc.ofdm).unwrap(), Mode::Train)
            .unwrap();
        let (_, dz) = soft_bit_loss(tape.output(), bits.as_slice(), &LossConfig::default()).unwrap();
        g.zero_grad();
        g.backward(&tape, &[(logits, &dz)]).unwrap();
        g.update_running_stats(&tape);
        adam.step(&mut g, 1e-3);
    }
    for p in base.graph.params() {
        let inside = g.param(&format!("receiver/{}", p.name)).unwrap();
        assert_eq!(inside.values, p.values, "{}", p.name);
    }
    assert!(g.param("cp_process/w").unwrap().grad.iter().any(|v| *v != 0.0));
}
