//! Frame assembly, cyclic prefix handling, PAPR limiting and the complete
//! transmit chain.

use crate::config::OfdmConfig;
use crate::dft::Fft;
use crate::error::{PhyError, Result};
use crate::grid::ComplexGrid;
use crate::layout::FrameLayout;
use crate::modulation::{modulate, BitBlock};
use num_complex::Complex64;

/// Places data points and pilots on a frequency-domain grid.
///
/// `data_points` has dims `[frames, D]` (or `[D]`); the result is
/// `[frames, F, N]` in natural bin order with guards set to zero.
pub fn assemble_frame(
    data_points: &ComplexGrid,
    layout: &FrameLayout,
    cfg: &OfdmConfig,
) -> Result<ComplexGrid> {
    let d = cfg.data_cells;
    if data_points.row_len() != d || data_points.len() % d != 0 {
        return Err(PhyError::shape(&[d], data_points.dims()));
    }
    let frames = data_points.len() / d;
    let per_frame = cfg.frame_syms * cfg.n_fft;
    let mut out = ComplexGrid::zeros(&[frames, cfg.frame_syms, cfg.n_fft]);
    let grid = out.as_mut_slice();
    for (f, pts) in data_points.rows().enumerate() {
        let frame = &mut grid[f * per_frame..(f + 1) * per_frame];
        for &cell in layout.pilots() {
            frame[layout.grid_index(cfg, cell)] = cfg.pilot_value;
        }
        for (&cell, &p) in layout.data().iter().zip(pts) {
            frame[layout.grid_index(cfg, cell)] = p;
        }
    }
    Ok(out)
}

/// Inverse bookkeeping of [`assemble_frame`]: `(data [frames, D], pilots [frames, P])`.
pub fn disassemble_frame(
    grid: &ComplexGrid,
    layout: &FrameLayout,
    cfg: &OfdmConfig,
) -> Result<(ComplexGrid, ComplexGrid)> {
    let per_frame = cfg.frame_syms * cfg.n_fft;
    if grid.row_len() != cfg.n_fft || grid.len() % per_frame != 0 {
        return Err(PhyError::shape(&[cfg.frame_syms, cfg.n_fft], grid.dims()));
    }
    let frames = grid.len() / per_frame;
    let mut data = Vec::with_capacity(frames * cfg.data_cells);
    let mut pilots = Vec::with_capacity(frames * cfg.pilot_cells);
    for frame in grid.as_slice().chunks_exact(per_frame) {
        data.extend(layout.data().iter().map(|&c| frame[layout.grid_index(cfg, c)]));
        pilots.extend(layout.pilots().iter().map(|&c| frame[layout.grid_index(cfg, c)]));
    }
    Ok((
        ComplexGrid::from_complex(&[frames, cfg.data_cells], data)?,
        ComplexGrid::from_complex(&[frames, cfg.pilot_cells], pilots)?,
    ))
}

/// Prepends the last `cp_len` samples of each length-N row.
pub fn add_cp(symbols: &ComplexGrid, cfg: &OfdmConfig) -> Result<ComplexGrid> {
    let (n, cp) = (cfg.n_fft, cfg.cp_len);
    if symbols.row_len() != n {
        return Err(PhyError::shape(&[n], &[symbols.row_len()]));
    }
    let mut dims = symbols.dims().to_vec();
    *dims.last_mut().expect("row_len checked") = n + cp;
    let mut out = Vec::with_capacity(symbols.len() / n * (n + cp));
    for row in symbols.rows() {
        out.extend_from_slice(&row[n - cp..]);
        out.extend_from_slice(row);
    }
    ComplexGrid::from_complex(&dims, out)
}

/// Drops the first `cp_len` samples of each length-S row.
pub fn remove_cp(symbols: &ComplexGrid, cfg: &OfdmConfig) -> Result<ComplexGrid> {
    let (s, cp) = (cfg.sym_len, cfg.cp_len);
    if symbols.row_len() != s {
        return Err(PhyError::shape(&[s], &[symbols.row_len()]));
    }
    let mut dims = symbols.dims().to_vec();
    *dims.last_mut().expect("row_len checked") = cfg.n_fft;
    let out = symbols.rows().flat_map(|r| r[cp..].iter().copied()).collect();
    ComplexGrid::from_complex(&dims, out)
}

/// Peak-to-average power ratio of a block of samples, in dB.
pub fn papr_db(samples: &[Complex64]) -> f64 {
    let (peak, sum) = samples
        .iter()
        .map(|z| z.norm_sqr())
        .fold((0.0f64, 0.0f64), |(p, s), v| (p.max(v), s + v));
    if sum == 0.0 {
        return 0.0;
    }
    10.0 * (peak / (sum / samples.len() as f64)).log10()
}

/// Magnitude-clips one frame in place so that its PAPR does not exceed
/// `limit_db`, preserving the phase of every sample.
///
/// The clip level `T` satisfies `T = r * mean_after_clip(T)` with
/// `r = 10^(limit_db/10)`; it is found in closed form by scanning the sorted
/// sample powers. Returns the number of clipped samples.
pub fn clip_frame(frame: &mut [Complex64], limit_db: f64) -> usize {
    let len = frame.len() as f64;
    if frame.is_empty() {
        return 0;
    }
    let ratio = 10f64.powf(limit_db / 10.0);
    let mut powers: Vec<f64> = frame.iter().map(|z| z.norm_sqr()).collect();
    let total: f64 = powers.iter().sum();
    if total == 0.0 {
        return 0;
    }
    powers.sort_unstable_by(|a, b| b.total_cmp(a));
    if powers[0] <= ratio * total / len {
        return 0;
    }
    // With the k largest samples clipped to T, the rest keep energy `rest`:
    //   T = ratio * (rest + k T) / len  =>  T = ratio * rest / (len - ratio k).
    let mut rest = total;
    let mut threshold = None;
    for k in 1..powers.len() {
        rest -= powers[k - 1];
        let denom = len - ratio * k as f64;
        if denom <= 0.0 {
            break;
        }
        let t = ratio * rest / denom;
        if t >= powers[k] && t <= powers[k - 1] {
            threshold = Some(t);
            break;
        }
    }
    let Some(t) = threshold else {
        return 0;
    };
    let amp = t.sqrt();
    let mut clipped = 0;
    for z in frame.iter_mut() {
        let p = z.norm_sqr();
        if p > t {
            *z *= amp / p.sqrt();
            clipped += 1;
        }
    }
    clipped
}

/// Applies [`clip_frame`] to every frame of a `[frames, F, S]` (or `[F, S]`) grid.
pub fn limit_papr(tx: &ComplexGrid, cfg: &OfdmConfig) -> ComplexGrid {
    let mut out = tx.clone();
    let frame_len = cfg.frame_len();
    for frame in out.as_mut_slice().chunks_mut(frame_len) {
        clip_frame(frame, cfg.papr_limit_db);
    }
    out
}

/// The complete transmit chain with its precomputed layout and FFT plan.
#[derive(Debug, Clone)]
pub struct Transmitter {
    cfg: OfdmConfig,
    layout: FrameLayout,
    fft: Fft,
}

impl Transmitter {
    pub fn new(cfg: &OfdmConfig) -> Result<Self> {
        let layout = FrameLayout::build(cfg)?;
        Ok(Self {
            cfg: cfg.clone(),
            layout,
            fft: Fft::new(cfg.n_fft),
        })
    }

    pub fn config(&self) -> &OfdmConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &FrameLayout {
        &self.layout
    }

    pub fn fft(&self) -> &Fft {
        &self.fft
    }

    /// modulate -> assemble -> IDFT -> add CP -> PAPR limit.
    /// Output dims `[frames, F, S]`.
    pub fn transmit(&self, bits: &BitBlock) -> Result<ComplexGrid> {
        let cfg = &self.cfg;
        if bits.cells() != cfg.data_cells || bits.bits_per_cell() != cfg.mod_order {
            return Err(PhyError::shape(
                &[bits.frames(), cfg.data_cells, cfg.mod_order],
                &bits.shape(),
            ));
        }
        let points = modulate(bits, cfg.mod_order)?;
        let mut freq = assemble_frame(&points, &self.layout, cfg)?;
        self.fft.process(freq.as_mut_slice(), true);
        let with_cp = add_cp(&freq, cfg)?;
        Ok(limit_papr(&with_cp, cfg))
    }
}

/// One-shot transmit; see [`Transmitter::transmit`].
pub fn transmit(bits: &BitBlock, cfg: &OfdmConfig, layout: &FrameLayout) -> Result<ComplexGrid> {
    let tx = Transmitter {
        cfg: cfg.clone(),
        layout: layout.clone(),
        fft: Fft::new(cfg.n_fft),
    };
    tx.transmit(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dft::dft_reference;
    use crate::layout::CellRole;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn setup() -> (OfdmConfig, FrameLayout) {
        let cfg = OfdmConfig::default();
        let layout = FrameLayout::build(&cfg).unwrap();
        (cfg, layout)
    }

    fn random_points(n: usize, m: usize, seed: u64) -> ComplexGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits = BitBlock::random(n, 368, m, &mut rng);
        modulate(&bits, m).unwrap()
    }

    #[test]
    fn zero_data_leaves_only_pilots() {
        let (cfg, layout) = setup();
        let zeros = ComplexGrid::zeros(&[1, 368]);
        let grid = assemble_frame(&zeros, &layout, &cfg).unwrap();
        let nonzero = grid.as_slice().iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nonzero, 64);
        for &c in layout.pilots() {
            assert_eq!(grid.as_slice()[layout.grid_index(&cfg, c)], cfg.pilot_value);
        }
    }

    #[test]
    fn frame_energy_is_data_plus_pilots() {
        let (cfg, layout) = setup();
        let pts = random_points(1, 4, 3);
        let mean_data: f64 = pts.mean_power();
        let grid = assemble_frame(&pts, &layout, &cfg).unwrap();
        let expected = 368.0 * mean_data + 64.0 * 2.0;
        assert!((grid.energy() - expected).abs() < 1e-9);
    }

    #[test]
    fn guards_stay_empty() {
        let (cfg, layout) = setup();
        let pts = random_points(2, 2, 4);
        let grid = assemble_frame(&pts, &layout, &cfg).unwrap();
        for f in 0..2 {
            for sym in 0..8 {
                for s in 0..64 {
                    let cell = crate::layout::Cell {
                        symbol: sym,
                        subcarrier: s,
                    };
                    if layout.role(cell) == CellRole::Guard {
                        let z = grid.as_slice()[f * 512 + layout.grid_index(&cfg, cell)];
                        assert_eq!(z, Complex64::new(0.0, 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn disassemble_inverts_assemble() {
        let (cfg, layout) = setup();
        let pts = random_points(3, 3, 5);
        let grid = assemble_frame(&pts, &layout, &cfg).unwrap();
        let (data, pilots) = disassemble_frame(&grid, &layout, &cfg).unwrap();
        assert_eq!(data, pts);
        assert!(pilots.as_slice().iter().all(|&p| p == cfg.pilot_value));
    }

    #[test]
    fn assemble_rejects_wrong_count() {
        let (cfg, layout) = setup();
        let short = ComplexGrid::zeros(&[1, 367]);
        assert!(assemble_frame(&short, &layout, &cfg).is_err());
    }

    #[test]
    fn cp_round_trip_and_copy() {
        let (cfg, _) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let sym = (0..8 * 64)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let g = ComplexGrid::from_complex(&[8, 64], sym).unwrap();
        let with = add_cp(&g, &cfg).unwrap();
        assert_eq!(with.dims(), &[8, 80]);
        for row in with.rows() {
            assert_eq!(&row[0..16], &row[64..80]);
        }
        let back = remove_cp(&with, &cfg).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.row_len(), 64);
    }

    #[test]
    fn cp_rejects_wrong_length() {
        let (cfg, _) = setup();
        assert!(add_cp(&ComplexGrid::zeros(&[2, 80]), &cfg).is_err());
        assert!(remove_cp(&ComplexGrid::zeros(&[2, 64]), &cfg).is_err());
    }

    #[test]
    fn papr_under_limit_is_untouched() {
        let (cfg, _) = setup();
        let frame: Vec<Complex64> = (0..640)
            .map(|i| Complex64::from_polar(1.0, i as f64 * 0.1))
            .collect();
        let g = ComplexGrid::from_complex(&[8, 80], frame).unwrap();
        assert_eq!(limit_papr(&g, &cfg), g);
    }

    #[test]
    fn single_peak_is_clipped_with_phase() {
        // 639 unit-power samples and one at 100x: hand-solve the clip level.
        let mut frame = vec![Complex64::new(1.0, 0.0); 640];
        let spike = Complex64::from_polar(10.0, 0.7);
        frame[123] = spike;
        let ratio = 10f64.powf(0.9);
        let t = ratio * 639.0 / (640.0 - ratio);
        let clipped = clip_frame(&mut frame, 9.0);
        assert_eq!(clipped, 1);
        assert!((frame[123].norm_sqr() - t).abs() < 1e-9);
        assert!((frame[123].arg() - 0.7).abs() < 1e-12);
        assert!((papr_db(&frame) - 9.0).abs() < 1e-9);
        assert!(frame
            .iter()
            .enumerate()
            .all(|(i, z)| i == 123 || *z == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn papr_bound_on_random_frames() {
        let (cfg, _) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let mut frame: Vec<Complex64> = (0..640)
                .map(|_| {
                    let a: f64 = StandardNormal.sample(&mut rng);
                    let b: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(a, b)
                })
                .collect();
            // Heavy tails make clipping common.
            frame[rng.random_range(0..640)] *= 4.0;
            clip_frame(&mut frame, cfg.papr_limit_db);
            assert!(papr_db(&frame) <= 9.0 + 1e-9);
        }
    }

    #[test]
    fn transmit_shape_and_cp() {
        let (cfg, layout) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let bits = BitBlock::random(2, 368, 2, &mut rng);
        let tx = transmit(&bits, &cfg, &layout).unwrap();
        assert_eq!(tx.shape(), vec![2, 8, 80, 2]);
        for frame in tx.as_slice().chunks(640) {
            assert!(papr_db(frame) <= 9.0 + 1e-9);
        }
    }

    #[test]
    fn transmit_without_clip_matches_reference_chain() {
        let (cfg, layout) = setup();
        let cfg = OfdmConfig {
            papr_limit_db: 60.0,
            ..cfg
        };
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let bits = BitBlock::random(1, 368, 2, &mut rng);
        let tx = transmit(&bits, &cfg, &layout).unwrap();
        let pts = modulate(&bits, 2).unwrap();
        let freq = assemble_frame(&pts, &layout, &cfg)
            .unwrap()
            .reshape(&[8, 64])
            .unwrap();
        let time = dft_reference(&freq, true);
        let expect = add_cp(&time, &cfg).unwrap();
        for (a, b) in tx.as_slice().iter().zip(expect.as_slice()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn pilot_only_frame_is_deterministic() {
        let (cfg, layout) = setup();
        let cfg = cfg.with_mod_order(1);
        let bits = BitBlock::zeros(1, 368, 1);
        let a = transmit(&bits, &cfg, &layout).unwrap();
        let b = transmit(&bits, &cfg, &layout).unwrap();
        assert_eq!(a.as_reals(), b.as_reals());
    }

    #[test]
    fn bits_shape_checked() {
        let (cfg, layout) = setup();
        let bits = BitBlock::zeros(1, 368, 3);
        assert!(transmit(&bits, &cfg, &layout).is_err());
    }
}
