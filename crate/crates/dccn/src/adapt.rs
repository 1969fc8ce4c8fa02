//! Conversions between physical-layer containers and network tensors.

use crate::error::{DccnError, Result};
use cxnn::{Real, Tensor};
use ofdm_core::{BitBlock, ComplexGrid, OfdmConfig};

/// `[frames, F, S]` received samples to a `[frames, F, S, 2]` batch.
pub fn frames_to_tensor<T: Real>(rx: &ComplexGrid, cfg: &OfdmConfig) -> Result<Tensor<T>> {
    let dims = rx.dims();
    if dims.len() != 3 || dims[1] != cfg.frame_syms || dims[2] != cfg.sym_len {
        return Err(DccnError::Config(format!(
            "expected received frames [_, {}, {}], got {dims:?}",
            cfg.frame_syms, cfg.sym_len
        )));
    }
    Ok(Tensor::from_f64(&rx.shape(), rx.as_reals())?)
}

/// A `[.., 2]` tensor back to a complex grid.
pub fn tensor_to_grid<T: Real>(t: &Tensor<T>) -> Result<ComplexGrid> {
    Ok(ComplexGrid::from_reals(t.shape(), &t.to_f64_vec())?)
}

/// Hard decisions from `[B, D, m, 2]` soft bits: bit 1 wherever `p1 > p0`.
pub fn hard_decisions<T: Real>(probs: &Tensor<T>) -> Result<BitBlock> {
    let shape = probs.shape();
    if shape.len() != 4 || shape[3] != 2 {
        return Err(DccnError::Config(format!(
            "soft bits must be [B, D, m, 2], got {shape:?}"
        )));
    }
    let bits = probs
        .data()
        .chunks_exact(2)
        .map(|pair| u8::from(pair[1] > pair[0]))
        .collect();
    Ok(BitBlock::new(shape[0], shape[1], shape[2], bits)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ofdm_core::Complex64;

    #[test]
    fn grid_tensor_round_trip() {
        let cfg = OfdmConfig::default();
        let data: Vec<Complex64> = (0..2 * 8 * 80)
            .map(|i| Complex64::new(i as f64, -(i as f64)))
            .collect();
        let grid = ComplexGrid::from_complex(&[2, 8, 80], data).unwrap();
        let t = frames_to_tensor::<f64>(&grid, &cfg).unwrap();
        assert_eq!(t.shape(), &[2, 8, 80, 2]);
        assert_eq!(t.data()[3], -1.0);
        assert_eq!(tensor_to_grid(&t).unwrap(), grid);
        let wrong = ComplexGrid::zeros(&[2, 8, 64]);
        assert!(frames_to_tensor::<f32>(&wrong, &cfg).is_err());
    }

    #[test]
    fn decisions_follow_larger_probability() {
        let p = Tensor::<f32>::from_f64(&[1, 2, 1, 2], &[0.9, 0.1, 0.2, 0.8]).unwrap();
        assert_eq!(hard_decisions(&p).unwrap().as_slice(), &[0, 1]);
    }
}
