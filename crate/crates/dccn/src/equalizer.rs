//! Learned channel equalizer: time-domain frame in, equalized time-domain
//! frame out, shaped to feed the basic receiver.

use crate::config::{DccnConfig, EstInput};
use crate::error::{DccnError, Result};
use cxnn::{Graph, NodeId, Real};

pub const EQUALIZER_INPUT: &str = "input";

/// Number of residual estimators after the first LS-style estimate.
pub const RESIDUAL_STAGES: usize = 4;

pub fn build_equalizer<T: Real>(dc: &DccnConfig) -> Result<Graph<T>> {
    dc.validate()?;
    if dc.variant != crate::Variant::Original {
        return Err(DccnError::Config(format!(
            "variant `{}` only applies to the basic receiver",
            dc.variant
        )));
    }
    let ofdm = &dc.ofdm;
    let (f, n, s, p) = (ofdm.frame_syms, ofdm.n_fft, ofdm.sym_len, ofdm.pilot_cells);
    let w = dc.symbol_width();

    let mut g = Graph::<T>::new(EQUALIZER_INPUT, &dc.input_shape());
    let x = g.input();
    let mut h = g.layer_norm("input_ln", x, dc.norm_eps)?;
    if !dc.use_cp {
        h = g.slice("cp_drop", h, 1, ofdm.cp_len, s)?;
    }
    let h = g.reshape("reshape0", h, &[f, 2 * w])?;
    let h = g.dense("cp_process", h, 2 * n, true)?;
    let h = g.reshape("reshape1", h, &[f, n, 2])?;
    let dft = g.complex_conv1d("dft_like", h, n, n)?;
    let flat = g.reshape("reshape2", dft, &[2 * f * n])?;

    let pilot = g.dense("pilot", flat, 2 * p, true)?;
    let mut chain: Vec<NodeId> = vec![pilot, g.dense("est0", pilot, 2 * p, true)?];
    for k in 1..=RESIDUAL_STAGES {
        let (a, b) = (chain[k - 1], chain[k]);
        let joined = match dc.est_input {
            EstInput::Concat => g.concat(&format!("est{k}_in"), &[a, b])?,
            EstInput::Difference => g.subtract(&format!("est{k}_in"), a, b)?,
        };
        chain.push(g.dense(&format!("est{k}"), joined, 2 * p, true)?);
    }
    let mut h = g.concat("concat", &chain)?;
    for k in 0..3 {
        let d = g.dense(&format!("interpolate{k}"), h, 2 * f * n, true)?;
        h = g.tanh(&format!("interpolate{k}_tanh"), d)?;
    }
    let h = g.reshape("reshape3", h, &[f, n, 1, 2])?;
    let h = g.complex_conv2d("filter2d", h, f, n)?;
    let est = g.reshape("estimates", h, &[f, n, 2])?;
    let eq = g.complex_divide("equalization", dft, est, dc.div_eps)?;
    let time = g.complex_conv1d("idft_like", eq, n, n)?;
    let flat = g.reshape("reshape4", time, &[2 * f * n])?;
    let h = g.dense("cp_handle", flat, 2 * f * s, true)?;
    g.reshape("output", h, &[f, s, 2])?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ofdm_core::OfdmConfig;

    #[test]
    fn output_matches_receiver_input() {
        for cp in [false, true] {
            let dc = DccnConfig::new(OfdmConfig::default(), cp);
            let g = build_equalizer::<f32>(&dc).unwrap();
            assert_eq!(g.output_shape(), &[8, 80, 2]);
            assert_eq!(g.output_shape(), g.input_shape());
        }
    }

    #[test]
    fn shape_ledger() {
        let dc = DccnConfig::new(OfdmConfig::default(), true);
        let g = build_equalizer::<f32>(&dc).unwrap();
        let shape = |name: &str| g.shape(g.find(name).unwrap()).to_vec();
        assert_eq!(shape("input_ln"), [8, 80, 2]);
        assert!(g.find("cp_drop").is_err());
        assert_eq!(shape("reshape0"), [8, 160]);
        assert_eq!(shape("cp_process"), [8, 128]);
        assert_eq!(shape("reshape1"), [8, 64, 2]);
        assert_eq!(shape("dft_like"), [8, 64, 2]);
        assert_eq!(shape("reshape2"), [1024]);
        assert_eq!(shape("pilot"), [128]);
        for k in 0..=4 {
            assert_eq!(shape(&format!("est{k}")), [128]);
        }
        assert_eq!(shape("est1_in"), [256]);
        assert_eq!(shape("concat"), [768]);
        for k in 0..3 {
            assert_eq!(shape(&format!("interpolate{k}_tanh")), [1024]);
        }
        assert_eq!(shape("reshape3"), [8, 64, 1, 2]);
        assert_eq!(shape("filter2d"), [8, 64, 1, 2]);
        assert_eq!(shape("estimates"), [8, 64, 2]);
        assert_eq!(shape("equalization"), [8, 64, 2]);
        assert_eq!(shape("idft_like"), [8, 64, 2]);
        assert_eq!(shape("reshape4"), [1024]);
        assert_eq!(shape("cp_handle"), [1280]);
        assert_eq!(shape("output"), [8, 80, 2]);
        assert_eq!(g.param("filter2d/w").unwrap().shape, vec![8, 64, 2]);
    }

    #[test]
    fn difference_inputs_are_narrower() {
        let mut dc = DccnConfig::new(OfdmConfig::default(), false);
        dc.est_input = EstInput::Difference;
        let g = build_equalizer::<f32>(&dc).unwrap();
        assert_eq!(g.shape(g.find("est1_in").unwrap()), &[128]);
        assert_eq!(g.shape(g.find("reshape0").unwrap()), &[8, 128]);
    }

    #[test]
    fn variants_rejected() {
        let dc = DccnConfig::new(OfdmConfig::default(), false).with_variant(crate::Variant::B);
        assert!(build_equalizer::<f32>(&dc).is_err());
    }
}
