use crate::config::OfdmConfig;
use crate::error::{PhyError, Result};
use crate::grid::ComplexGrid;
use crate::layout::FrameLayout;
use num_complex::Complex64;

/// Estimates below this magnitude are treated as erasures by [`equalize`].
pub const ERASURE_EPS: f64 = 1e-12;

/// Channel estimate over one frame's `F x N` grid (natural bin order).
/// Cells that carry no estimate have `known == false`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    frame_syms: usize,
    n_fft: usize,
    values: Vec<Complex64>,
    known: Vec<bool>,
}

impl ChannelEstimate {
    pub fn empty(frame_syms: usize, n_fft: usize) -> Self {
        Self {
            frame_syms,
            n_fft,
            values: vec![Complex64::new(0.0, 0.0); frame_syms * n_fft],
            known: vec![false; frame_syms * n_fft],
        }
    }

    /// The same response `h` (per natural bin) on every non-guard cell.
    pub fn from_response(h: &[Complex64], layout: &FrameLayout, cfg: &OfdmConfig) -> Self {
        let mut est = Self::empty(cfg.frame_syms, cfg.n_fft);
        for f in 0..cfg.frame_syms {
            for &s in layout.used_subcarriers() {
                let b = cfg.bin_of(s);
                est.set(f, b, h[b]);
            }
        }
        est
    }

    pub fn frame_syms(&self) -> usize {
        self.frame_syms
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn get(&self, symbol: usize, bin: usize) -> Option<Complex64> {
        let i = symbol * self.n_fft + bin;
        self.known[i].then_some(self.values[i])
    }

    pub fn set(&mut self, symbol: usize, bin: usize, value: Complex64) {
        let i = symbol * self.n_fft + bin;
        self.values[i] = value;
        self.known[i] = true;
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn known(&self) -> &[bool] {
        &self.known
    }

    pub fn known_count(&self) -> usize {
        self.known.iter().filter(|k| **k).count()
    }

    /// Estimate as a `[F, N]` grid; unknown cells are zero.
    pub fn to_grid(&self) -> ComplexGrid {
        ComplexGrid::from_complex(&[self.frame_syms, self.n_fft], self.values.clone())
            .expect("consistent dims")
    }
}

/// `H_P = Y_P / X_P` on every pilot cell of one frequency-domain frame.
pub fn ls_estimate(rx_freq: &ComplexGrid, layout: &FrameLayout, cfg: &OfdmConfig) -> Result<ChannelEstimate> {
    let per_frame = cfg.frame_syms * cfg.n_fft;
    if rx_freq.len() != per_frame {
        return Err(PhyError::shape(&[cfg.frame_syms, cfg.n_fft], rx_freq.dims()));
    }
    let y = rx_freq.as_slice();
    let mut est = ChannelEstimate::empty(cfg.frame_syms, cfg.n_fft);
    for &cell in layout.pilots() {
        let b = cfg.bin_of(cell.subcarrier);
        est.set(cell.symbol, b, y[cell.symbol * cfg.n_fft + b] / cfg.pilot_value);
    }
    Ok(est)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equalized {
    /// `Y / H` on cells with a usable estimate, zero elsewhere.
    pub grid: ComplexGrid,
    /// Cells whose estimate magnitude fell below [`ERASURE_EPS`].
    pub erasures: Vec<bool>,
}

/// One-tap equalizer `X = Y / H` over one `[F, N]` frame.
pub fn equalize(rx_freq: &ComplexGrid, est: &ChannelEstimate) -> Result<Equalized> {
    let n = est.frame_syms * est.n_fft;
    if rx_freq.len() != n {
        return Err(PhyError::shape(&[est.frame_syms, est.n_fft], rx_freq.dims()));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let mut erasures = vec![false; n];
    for i in 0..n {
        if !est.known[i] {
            continue;
        }
        let h = est.values[i];
        if h.norm() < ERASURE_EPS {
            erasures[i] = true;
        } else {
            out[i] = rx_freq.as_slice()[i] / h;
        }
    }
    Ok(Equalized {
        grid: ComplexGrid::from_complex(&[est.frame_syms, est.n_fft], out)?,
        erasures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_realization, ChannelKind};
    use crate::frame::{assemble_frame, disassemble_frame};
    use crate::modulation::{modulate, BitBlock};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (OfdmConfig, FrameLayout) {
        let cfg = OfdmConfig::default();
        let layout = FrameLayout::build(&cfg).unwrap();
        (cfg, layout)
    }

    /// Frequency-domain frame faded by `h` (per bin), noiseless.
    fn faded_grid(h: &[Complex64], seed: u64) -> (ComplexGrid, ComplexGrid) {
        let (cfg, layout) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits = BitBlock::random(1, 368, 2, &mut rng);
        let pts = modulate(&bits, 2).unwrap();
        let x = assemble_frame(&pts, &layout, &cfg).unwrap();
        let y: Vec<Complex64> = x
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, z)| z * h[i % 64])
            .collect();
        (x, ComplexGrid::from_complex(&[8, 64], y).unwrap())
    }

    #[test]
    fn flat_gain_recovered_on_pilots() {
        let (cfg, layout) = setup();
        let g = Complex64::new(-0.4, 0.9);
        let (_, y) = faded_grid(&[g; 64], 1);
        let est = ls_estimate(&y, &layout, &cfg).unwrap();
        assert_eq!(est.known_count(), 64);
        for &c in layout.pilots() {
            let h = est.get(c.symbol, cfg.bin_of(c.subcarrier)).unwrap();
            assert!((h - g).norm() < 1e-12);
        }
    }

    #[test]
    fn epa_pilots_match_true_response() {
        let (cfg, layout) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = draw_realization(ChannelKind::Epa, &cfg, &mut rng).unwrap();
        let h = r.frequency_response(64);
        let (_, y) = faded_grid(&h, 3);
        let est = ls_estimate(&y, &layout, &cfg).unwrap();
        for &c in layout.pilots() {
            let b = cfg.bin_of(c.subcarrier);
            assert!((est.get(c.symbol, b).unwrap() - h[b]).norm() < 1e-8);
        }
    }

    #[test]
    fn awgn_estimates_average_to_one() {
        let (cfg, layout) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (x, _) = faded_grid(&[Complex64::new(1.0, 0.0); 64], 5);
        let mut sum = Complex64::new(0.0, 0.0);
        let frames = 400;
        for _ in 0..frames {
            let mut y = x.clone();
            crate::channel::add_noise(y.as_mut_slice(), 0.5, &mut rng);
            let est = ls_estimate(&y, &layout, &cfg).unwrap();
            sum += est.values().iter().sum::<Complex64>();
        }
        let mean = sum / (frames as f64 * 64.0);
        // Per-estimate noise variance 0.5/2; 25600 samples -> sd ~ 0.003.
        assert!((mean - 1.0).norm() < 0.015, "{mean}");
    }

    #[test]
    fn perfect_csi_recovers_points() {
        let (cfg, layout) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let r = draw_realization(ChannelKind::Epa, &cfg, &mut rng).unwrap();
        let h = r.frequency_response(64);
        let (x, y) = faded_grid(&h, 7);
        let est = ChannelEstimate::from_response(&h, &layout, &cfg);
        let eq = equalize(&y, &est).unwrap();
        let (a, _) = disassemble_frame(&x, &layout, &cfg).unwrap();
        let (b, _) = disassemble_frame(&eq.grid, &layout, &cfg).unwrap();
        for (p, q) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((p - q).norm() < 1e-8);
        }
    }

    #[test]
    fn doubled_estimate_halves_output() {
        let (cfg, layout) = setup();
        let h = vec![Complex64::new(0.7, 0.2); 64];
        let (x, y) = faded_grid(&h, 8);
        let h2: Vec<Complex64> = h.iter().map(|z| z * 2.0).collect();
        let eq = equalize(&y, &ChannelEstimate::from_response(&h2, &layout, &cfg)).unwrap();
        for &c in layout.data() {
            let i = layout.grid_index(&cfg, c);
            assert!((eq.grid.as_slice()[i] - x.as_slice()[i] * 0.5).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_estimate_is_erased() {
        let (cfg, layout) = setup();
        let (_, y) = faded_grid(&[Complex64::new(1.0, 0.0); 64], 9);
        let mut est = ChannelEstimate::from_response(&[Complex64::new(1.0, 0.0); 64], &layout, &cfg);
        let c = layout.data()[5];
        let b = cfg.bin_of(c.subcarrier);
        est.set(c.symbol, b, Complex64::new(0.0, 0.0));
        let eq = equalize(&y, &est).unwrap();
        let i = c.symbol * 64 + b;
        assert!(eq.erasures[i]);
        assert_eq!(eq.grid.as_slice()[i], Complex64::new(0.0, 0.0));
        assert_eq!(eq.erasures.iter().filter(|e| **e).count(), 1);
    }
}
