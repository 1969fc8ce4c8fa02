//! Hand-set equalizer parameters that turn the learned equalizer graph into
//! a least-squares pilot estimator with 2-D linear interpolation.
//!
//! The tanh layers are run in their linear region: the interpolation
//! output is scaled down by [`TANH_SCALE`] and the 2-D filter scales it
//! back up.

use crate::config::DccnConfig;
use crate::equalizer::build_equalizer;
use crate::error::Result;
use cxnn::{conv1d_real_embedding, Graph};
use ofdm_core::dft::dft_matrix;
use ofdm_core::expert::interpolate;
use ofdm_core::{ChannelEstimate, Complex64, FrameLayout, Interpolation};

/// Scale applied before the tanh interpolation layers.
pub const TANH_SCALE: f64 = 1e-4;

fn interleave(z: &[Complex64]) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

/// Real `[2 * n_in, 2 * n_out]` dense weights for a complex `n_in -> n_out`
/// map with complex matrix `a[out][in]`.
fn complex_dense(a: &[Complex64], n_in: usize, n_out: usize) -> Vec<f64> {
    conv1d_real_embedding(&interleave(a), n_in, n_out)
}

fn set(g: &mut Graph<f64>, name: &str, values: Vec<f64>) -> Result<()> {
    let p = g.param_mut(name)?;
    assert_eq!(p.values.len(), values.len(), "{name}");
    p.values = values;
    Ok(())
}

fn zero(g: &mut Graph<f64>, name: &str) -> Result<()> {
    g.param_mut(name)?.values.iter_mut().for_each(|v| *v = 0.0);
    Ok(())
}

/// Complex `[rows, cols]` selection matrix with ones at `(out, in)` pairs.
fn selection(pairs: impl IntoIterator<Item = (usize, usize)>, n_in: usize, n_out: usize) -> Vec<Complex64> {
    let mut a = vec![Complex64::new(0.0, 0.0); n_in * n_out];
    for (o, i) in pairs {
        a[o * n_in + i] = Complex64::new(1.0, 0.0);
    }
    a
}

/// Interpolation weights `L[cell][pilot]`, built by pushing unit impulses
/// through the expert interpolator.
pub fn interpolation_matrix(dc: &DccnConfig, layout: &FrameLayout) -> Result<Vec<f64>> {
    let ofdm = &dc.ofdm;
    let (f, n) = (ofdm.frame_syms, ofdm.n_fft);
    let pilots = layout.pilots();
    let mut l = vec![0.0; f * n * pilots.len()];
    for (p, &cell) in pilots.iter().enumerate() {
        let mut est = ChannelEstimate::empty(f, n);
        for &other in pilots {
            let v = if other == cell { 1.0 } else { 0.0 };
            est.set(
                other.symbol,
                ofdm.bin_of(other.subcarrier),
                Complex64::new(v, 0.0),
            );
        }
        let full = interpolate(&est, Interpolation::Linear2d, layout, ofdm)?;
        for (i, (v, known)) in full.values().iter().zip(full.known()).enumerate() {
            if *known {
                l[i * pilots.len() + p] = v.re;
            }
        }
    }
    Ok(l)
}

/// The equalizer graph with parameters that reproduce LS estimation,
/// linear 2-D interpolation and one-tap equalization.
pub fn ls_equalizer(dc: &DccnConfig) -> Result<Graph<f64>> {
    let mut g = build_equalizer::<f64>(dc)?;
    let ofdm = &dc.ofdm;
    let layout = FrameLayout::build(ofdm)?;
    let (f, n, s, cp, p) = (
        ofdm.frame_syms,
        ofdm.n_fft,
        ofdm.sym_len,
        ofdm.cp_len,
        ofdm.pilot_cells,
    );
    let w = dc.symbol_width();
    let fn_ = f * n;

    let gamma = vec![1.0; g.param("input_ln/gamma")?.len()];
    set(&mut g, "input_ln/gamma", gamma)?;
    zero(&mut g, "input_ln/beta")?;

    // Drop the prefix if it is still there.
    let skip = w - n;
    set(
        &mut g,
        "cp_process/w",
        complex_dense(&selection((0..n).map(|t| (t, t + skip)), w, n), w, n),
    )?;
    zero(&mut g, "cp_process/b")?;

    // DFT rows of guard bins are zero so guards stay empty.
    let mut dft = dft_matrix(n, false);
    let used: Vec<usize> = layout
        .used_subcarriers()
        .iter()
        .map(|&sc| ofdm.bin_of(sc))
        .collect();
    for k in (0..n).filter(|k| !used.contains(k)) {
        dft[k * n..(k + 1) * n]
            .iter_mut()
            .for_each(|v| *v = Complex64::new(0.0, 0.0));
    }
    set(&mut g, "dft_like/w", interleave(&dft))?;

    let pilot_sel = selection(
        layout
            .pilots()
            .iter()
            .enumerate()
            .map(|(i, &c)| (i, layout.grid_index(ofdm, c))),
        fn_,
        p,
    );
    set(&mut g, "pilot/w", complex_dense(&pilot_sel, fn_, p))?;
    zero(&mut g, "pilot/b")?;

    let inv = Complex64::new(1.0, 0.0) / ofdm.pilot_value;
    let mut diag = vec![Complex64::new(0.0, 0.0); p * p];
    for i in 0..p {
        diag[i * p + i] = inv;
    }
    set(&mut g, "est0/w", complex_dense(&diag, p, p))?;
    zero(&mut g, "est0/b")?;
    for k in 1..=crate::equalizer::RESIDUAL_STAGES {
        zero(&mut g, &format!("est{k}/w"))?;
        zero(&mut g, &format!("est{k}/b"))?;
    }

    // interpolate0 reads the est0 block of the concatenation.
    let l = interpolation_matrix(dc, &layout)?;
    let width = 2 * p * (crate::equalizer::RESIDUAL_STAGES + 2);
    let mut w0 = vec![0.0; width * 2 * fn_];
    for cell in 0..fn_ {
        for q in 0..p {
            let v = TANH_SCALE * l[cell * p + q];
            for c in 0..2 {
                w0[(2 * p + 2 * q + c) * 2 * fn_ + 2 * cell + c] = v;
            }
        }
    }
    set(&mut g, "interpolate0/w", w0)?;
    // Guard cells get a unit estimate so the division leaves them at zero.
    let mut b0 = vec![0.0; 2 * fn_];
    for (cell, chunk) in b0.chunks_exact_mut(2).enumerate() {
        if !used.contains(&(cell % n)) {
            chunk[0] = TANH_SCALE;
        }
    }
    set(&mut g, "interpolate0/b", b0)?;
    for k in 1..3 {
        let mut eye = vec![0.0; 4 * fn_ * fn_];
        for i in 0..2 * fn_ {
            eye[i * 2 * fn_ + i] = 1.0;
        }
        set(&mut g, &format!("interpolate{k}/w"), eye)?;
        zero(&mut g, &format!("interpolate{k}/b"))?;
    }
    let mut delta = vec![0.0; 2 * fn_];
    delta[0] = 1.0 / TANH_SCALE;
    set(&mut g, "filter2d/w", delta)?;

    set(&mut g, "idft_like/w", interleave(&dft_matrix(n, true)))?;

    let mut cp_map = Vec::with_capacity(f * s);
    for sym in 0..f {
        for j in 0..s {
            let t = if j < cp { n - cp + j } else { j - cp };
            cp_map.push((sym * s + j, sym * n + t));
        }
    }
    set(
        &mut g,
        "cp_handle/w",
        complex_dense(&selection(cp_map, fn_, f * s), fn_, f * s),
    )?;
    zero(&mut g, "cp_handle/b")?;
    Ok(g)
}
