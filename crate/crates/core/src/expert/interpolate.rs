//! 2-D interpolation of scattered pilot estimates.
//!
//! Pass 1 runs along the subcarrier axis of every symbol that carries
//! estimates, using the FFT-shifted subcarrier index as abscissa. Pass 2 runs
//! along the symbol axis and fills symbols that had no estimate at all; with
//! the default scattered layout every symbol carries pilots and pass 2 is
//! a no-op. Both methods extrapolate linearly past the outermost samples, so
//! affine fields are reproduced exactly everywhere.

use super::estimate::ChannelEstimate;
use crate::config::OfdmConfig;
use crate::error::{PhyError, Result};
use crate::layout::FrameLayout;
use num_complex::Complex64;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Interpolation {
    Linear2d,
    Spline2d,
}

impl fmt::Display for Interpolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Interpolation::Linear2d => "linear2d",
            Interpolation::Spline2d => "spline2d",
        })
    }
}

impl FromStr for Interpolation {
    type Err = PhyError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear2d" | "linear" => Ok(Interpolation::Linear2d),
            "spline2d" | "spline" => Ok(Interpolation::Spline2d),
            _ => Err(PhyError::Unknown {
                what: "interpolation method",
                name: s.to_string(),
            }),
        }
    }
}

/// Interpolates samples `(xs, ys)` (strictly increasing `xs`) at `at`.
pub fn interp_1d(method: Interpolation, xs: &[f64], ys: &[Complex64], at: &[f64]) -> Vec<Complex64> {
    assert_eq!(xs.len(), ys.len());
    assert!(!xs.is_empty(), "interpolation needs at least one sample");
    if xs.len() == 1 {
        return vec![ys[0]; at.len()];
    }
    let second = match method {
        Interpolation::Spline2d if xs.len() > 2 => natural_second_derivatives(xs, ys),
        _ => vec![Complex64::new(0.0, 0.0); xs.len()],
    };
    let n = xs.len();
    let h_first = xs[1] - xs[0];
    let h_last = xs[n - 1] - xs[n - 2];
    let slope_first = (ys[1] - ys[0]) / h_first - second[1] * (h_first / 6.0);
    let slope_last = (ys[n - 1] - ys[n - 2]) / h_last + second[n - 2] * (h_last / 6.0);
    at.iter()
        .map(|&x| {
            if x <= xs[0] {
                return ys[0] + slope_first * (x - xs[0]);
            }
            if x >= xs[n - 1] {
                return ys[n - 1] + slope_last * (x - xs[n - 1]);
            }
            let j = xs.partition_point(|&v| v <= x) - 1;
            let h = xs[j + 1] - xs[j];
            let a = (xs[j + 1] - x) / h;
            let b = (x - xs[j]) / h;
            ys[j] * a
                + ys[j + 1] * b
                + (second[j] * (a * a * a - a) + second[j + 1] * (b * b * b - b)) * (h * h / 6.0)
        })
        .collect()
}

/// Second derivatives of the natural cubic spline (zero at both ends).
fn natural_second_derivatives(xs: &[f64], ys: &[Complex64]) -> Vec<Complex64> {
    let n = xs.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut m = vec![zero; n];
    // Thomas algorithm on the interior unknowns m[1..n-1].
    let k = n - 2;
    let mut diag = vec![0.0; k];
    let mut upper = vec![0.0; k];
    let mut rhs = vec![zero; k];
    for i in 0..k {
        let h0 = xs[i + 1] - xs[i];
        let h1 = xs[i + 2] - xs[i + 1];
        diag[i] = 2.0 * (h0 + h1);
        upper[i] = h1;
        rhs[i] = ((ys[i + 2] - ys[i + 1]) / h1 - (ys[i + 1] - ys[i]) / h0) * 6.0;
    }
    for i in 1..k {
        let lower = xs[i + 1] - xs[i];
        let w = lower / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        let prev = rhs[i - 1];
        rhs[i] -= prev * w;
    }
    for i in (0..k).rev() {
        let next = if i + 1 < k { m[i + 2] } else { zero };
        m[i + 1] = (rhs[i] - next * upper[i]) / diag[i];
    }
    m
}

/// Fills every non-guard cell of the frame from the known cells of `est`.
pub fn interpolate(
    est: &ChannelEstimate,
    method: Interpolation,
    layout: &FrameLayout,
    cfg: &OfdmConfig,
) -> Result<ChannelEstimate> {
    let used = layout.used_subcarriers();
    let used_x: Vec<f64> = used.iter().map(|&s| s as f64).collect();
    let mut out = ChannelEstimate::empty(cfg.frame_syms, cfg.n_fft);
    let mut filled = Vec::new();
    for f in 0..cfg.frame_syms {
        let (xs, ys): (Vec<f64>, Vec<Complex64>) = used
            .iter()
            .filter_map(|&s| est.get(f, cfg.bin_of(s)).map(|v| (s as f64, v)))
            .unzip();
        if xs.is_empty() {
            continue;
        }
        for (&s, v) in used.iter().zip(interp_1d(method, &xs, &ys, &used_x)) {
            out.set(f, cfg.bin_of(s), v);
        }
        filled.push(f);
    }
    if filled.is_empty() {
        return Err(PhyError::Config("no channel estimates to interpolate".into()));
    }
    if filled.len() < cfg.frame_syms {
        let ts: Vec<f64> = filled.iter().map(|&f| f as f64).collect();
        let all: Vec<f64> = (0..cfg.frame_syms).map(|f| f as f64).collect();
        for &s in used {
            let b = cfg.bin_of(s);
            let ys: Vec<Complex64> = filled
                .iter()
                .map(|&f| out.get(f, b).expect("filled row"))
                .collect();
            for (f, v) in interp_1d(method, &ts, &ys, &all).into_iter().enumerate() {
                if !filled.contains(&f) {
                    out.set(f, b, v);
                }
            }
        }
    }
    Ok(out)
}
