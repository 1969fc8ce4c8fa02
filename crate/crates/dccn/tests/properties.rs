use cxnn::Tensor;
use dccn::adapt::{frames_to_tensor, hard_decisions, tensor_to_grid};
use dccn::{build_model, Checkpoint, DccnConfig, EstInput, ModelKind, Variant};
use ofdm_core::{Complex64, ComplexGrid, OfdmConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn variant_names_round_trip(i in 0usize..8) {
        let v = Variant::ALL[i];
        prop_assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        for e in [EstInput::Concat, EstInput::Difference] {
            prop_assert_eq!(e.to_string().parse::<EstInput>().unwrap(), e);
        }
    }

    #[test]
    fn hard_decisions_pick_the_larger_probability(p in prop::collection::vec(0.0f32..1.0, 1..40)) {
        let data: Vec<f32> = p.iter().flat_map(|&q| [1.0 - q, q]).collect();
        let t = Tensor::from_vec(&[1, p.len(), 1, 2], data).unwrap();
        let bits = hard_decisions(&t).unwrap();
        for (b, q) in bits.as_slice().iter().zip(&p) {
            prop_assert_eq!(*b, u8::from(*q > 1.0 - *q));
        }
    }

    #[test]
    fn frames_survive_the_tensor_layout(seed in any::<u64>(), frames in 1usize..4) {
        let cfg = OfdmConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<Complex64> = (0..frames * cfg.frame_len())
            .map(|_| Complex64::new(rand::Rng::random_range(&mut rng, -3.0..3.0), rand::Rng::random_range(&mut rng, -3.0..3.0)))
            .collect();
        let rx = ComplexGrid::from_complex(&[frames, cfg.frame_syms, cfg.sym_len], data).unwrap();
        let t = frames_to_tensor::<f64>(&rx, &cfg).unwrap();
        prop_assert_eq!(t.shape(), &[frames, cfg.frame_syms, cfg.sym_len, 2][..]);
        let back = tensor_to_grid(&t).unwrap();
        prop_assert_eq!(back.as_slice(), rx.as_slice());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn checkpoint_bytes_round_trip(
        seed in any::<u64>(),
        episodes in 0u64..100_000,
        m in 1usize..=4,
        use_cp in any::<bool>(),
        variant in 0usize..8,
    ) {
        let dc = DccnConfig::new(OfdmConfig::default().with_mod_order(m), use_cp)
            .with_variant(Variant::ALL[variant]);
        let mut g = build_model::<f32>(ModelKind::Receiver, &dc).unwrap();
        g.initialize(&mut ChaCha8Rng::seed_from_u64(seed));
        let bytes = Checkpoint::new(ModelKind::Receiver, dc, seed, episodes, g).to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.seed, seed);
        prop_assert_eq!(back.episodes, episodes);
        prop_assert_eq!(back.to_bytes(), bytes);
    }
}
