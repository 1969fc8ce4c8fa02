use super::estimate::ChannelEstimate;
use crate::config::OfdmConfig;
use crate::error::{PhyError, Result};
use crate::layout::FrameLayout;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

const RIDGE: f64 = 1e-12;

/// Frequency-domain Wiener smoother `W = R (R + (sigma^2/|X_P|^2) I)^-1`
/// applied across the non-guard subcarriers of each symbol.
///
/// `R[k, l] = sum_i p_i exp(-2 pi i (k - l) d_i / N)` is built from the known
/// power-delay profile; `sigma^2/|X_P|^2` is the noise variance of a pilot LS
/// estimate, i.e. the inverse pilot SNR.
#[derive(Debug, Clone)]
pub struct LmmseSmoother {
    bins: Vec<usize>,
    filter: DMatrix<Complex64>,
}

impl LmmseSmoother {
    pub fn new(pdp: &[(usize, f64)], noise_var: f64, layout: &FrameLayout, cfg: &OfdmConfig) -> Result<Self> {
        let bins: Vec<usize> = layout.used_subcarriers().iter().map(|&s| cfg.bin_of(s)).collect();
        let u = bins.len();
        let n = cfg.n_fft as f64;
        let r = DMatrix::from_fn(u, u, |i, j| {
            let dk = bins[i] as f64 - bins[j] as f64;
            pdp.iter()
                .map(|&(d, p)| Complex64::from_polar(p, -2.0 * PI * dk * d as f64 / n))
                .sum::<Complex64>()
        });
        let reg = noise_var / cfg.pilot_power() + RIDGE;
        // R is Hermitian PSD and usually rank-deficient (few taps), so a
        // direct solve of (R + reg I) is badly conditioned. With
        // R = U diag(l) U^H the filter is U diag(l / (l + reg)) U^H.
        let eig = r.symmetric_eigen();
        let gains = eig.eigenvalues.map(|l| {
            let l = l.max(0.0);
            Complex64::new(l / (l + reg), 0.0)
        });
        let u = &eig.eigenvectors;
        let filter = u * DMatrix::from_diagonal(&gains) * u.adjoint();
        if filter.iter().any(|z| !z.is_finite()) {
            return Err(PhyError::Singular("LMMSE filter"));
        }
        Ok(Self { bins, filter })
    }

    /// Smooths every symbol of a fully interpolated estimate.
    pub fn smooth(&self, est: &ChannelEstimate) -> Result<ChannelEstimate> {
        let mut out = ChannelEstimate::empty(est.frame_syms(), est.n_fft());
        for f in 0..est.frame_syms() {
            let h = self
                .bins
                .iter()
                .map(|&b| {
                    est.get(f, b).ok_or(PhyError::Config(format!(
                        "LMMSE input lacks an estimate at symbol {f}, bin {b}"
                    )))
                })
                .collect::<Result<Vec<_>>>()?;
            let smoothed = &self.filter * DVector::from_vec(h);
            for (&b, &v) in self.bins.iter().zip(smoothed.iter()) {
                out.set(f, b, v);
            }
        }
        Ok(out)
    }
}

/// One-shot LMMSE refinement of an interpolated LS estimate.
pub fn lmmse_estimate(
    est: &ChannelEstimate,
    noise_var: f64,
    pdp: &[(usize, f64)],
    layout: &FrameLayout,
    cfg: &OfdmConfig,
) -> Result<ChannelEstimate> {
    LmmseSmoother::new(pdp, noise_var, layout, cfg)?.smooth(est)
}
