use ofdm_core::BerRecord;
use ofdm_lab::snr::{ebno_from_snr, snr_from_ebno};
use ofdm_lab::train::early_stop;
use ofdm_lab::{parse_csv, write_csv, Settings, TrainPlan};
use proptest::prelude::*;

proptest! {
    #[test]
    fn early_stop_fires_exactly_after_the_window(best in 0usize..1000, gap in 0usize..1000, window in 0usize..500) {
        let episode = best + gap;
        prop_assert_eq!(early_stop(episode, best, window), gap >= window);
        if early_stop(episode, best, window) {
            prop_assert!(early_stop(episode + 1, best, window));
        }
    }

    #[test]
    fn ber_csv_round_trips(
        rows in prop::collection::vec((-20.0f64..40.0, 1u64..10_000_000, 0u64..1000), 0..50),
        seed in any::<u64>(),
    ) {
        let records: Vec<BerRecord> = rows
            .iter()
            .map(|&(snr, bits, errs)| BerRecord::new(snr, bits, errs.min(bits)))
            .collect();
        let meta = vec![("seed".to_string(), seed.to_string())];
        let (meta_back, back) = parse_csv(&write_csv(&records, &meta)).unwrap();
        prop_assert_eq!(meta_back, meta);
        prop_assert_eq!(back, records);
    }

    #[test]
    fn settings_text_round_trips(
        seed in any::<u64>(),
        m in 1usize..=4,
        cp in any::<bool>(),
        variant in prop::sample::select(vec!["original", "a", "b", "c", "d", "e", "f", "g"]),
        episodes in prop::option::of(1usize..10_000),
    ) {
        let mut s = Settings::default();
        s.seed = seed;
        s.set("mod_order", &m.to_string()).unwrap();
        s.set("use_cp", if cp { "on" } else { "off" }).unwrap();
        s.set("variant", variant).unwrap();
        s.max_episodes = episodes;
        let mut back = Settings::default();
        back.apply_text(&s.render()).unwrap();
        prop_assert_eq!(back.render(), s.render());
        prop_assert_eq!(back.hash(), s.hash());
    }

    #[test]
    fn learning_rate_decays_monotonically(step in 0u64..1_000_000, m in 1usize..=4) {
        let plan = TrainPlan::receiver(m, 0);
        prop_assert!(plan.lr_at(step + 1) <= plan.lr_at(step));
        prop_assert!(plan.lr_at(step) <= plan.lr0);
        prop_assert!(plan.lr_at(step) > 0.0);
    }

    #[test]
    fn snr_and_ebno_convert_back(snr in -30.0f64..60.0, off in -10.0f64..10.0) {
        prop_assert!((snr_from_ebno(ebno_from_snr(snr, off), off) - snr).abs() < 1e-12);
    }
}
