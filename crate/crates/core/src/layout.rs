use crate::config::OfdmConfig;
use crate::error::{PhyError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellRole {
    Guard,
    Pilot,
    Data,
}

/// A resource cell: one subcarrier of one OFDM symbol.
///
/// `subcarrier` is the FFT-shifted index (0 is the most negative frequency).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub symbol: usize,
    pub subcarrier: usize,
}

/// Guard/pilot/data partition of a frame.
///
/// Guards are the lowest and highest `edge_guard` shifted bins plus the two
/// bins around DC. Symbol `f` carries its pilots on the non-guard positions
/// `(F*k + f) mod U`, `k = 0..P/F`, where `U` counts non-guard subcarriers in
/// ascending shifted order; with the default configuration the eight symbols
/// together place a pilot on every non-guard subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLayout {
    frame_syms: usize,
    n_fft: usize,
    roles: Vec<CellRole>,
    used: Vec<usize>,
    pilots: Vec<Cell>,
    data: Vec<Cell>,
}

impl FrameLayout {
    pub fn build(cfg: &OfdmConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_fft;
        let f_count = cfg.frame_syms;
        let edge = cfg.edge_guard();
        let dc = n / 2;
        let is_guard = |s: usize| s < edge || s >= n - edge || s == dc - 1 || s == dc;
        let used: Vec<usize> = (0..n).filter(|&s| !is_guard(s)).collect();
        debug_assert_eq!(used.len(), cfg.used_subcarriers());

        let per_sym = cfg.pilots_per_symbol();
        let mut roles = vec![CellRole::Guard; f_count * n];
        let mut pilots = Vec::with_capacity(cfg.pilot_cells);
        let mut data = Vec::with_capacity(cfg.data_cells);
        for f in 0..f_count {
            let row = &mut roles[f * n..(f + 1) * n];
            for &s in &used {
                row[s] = CellRole::Data;
            }
            for k in 0..per_sym {
                let s = used[(f_count * k + f) % used.len()];
                if row[s] == CellRole::Pilot {
                    return Err(PhyError::Config(format!(
                        "pilot rule places two pilots on subcarrier {s} of symbol {f}"
                    )));
                }
                row[s] = CellRole::Pilot;
            }
            for (s, role) in row.iter().enumerate() {
                let cell = Cell {
                    symbol: f,
                    subcarrier: s,
                };
                match role {
                    CellRole::Pilot => pilots.push(cell),
                    CellRole::Data => data.push(cell),
                    CellRole::Guard => {}
                }
            }
        }
        if data.len() != cfg.data_cells || pilots.len() != cfg.pilot_cells {
            return Err(PhyError::Config(format!(
                "layout produced {} data / {} pilot cells, expected {} / {}",
                data.len(),
                pilots.len(),
                cfg.data_cells,
                cfg.pilot_cells
            )));
        }
        Ok(Self {
            frame_syms: f_count,
            n_fft: n,
            roles,
            used,
            pilots,
            data,
        })
    }

    pub fn frame_syms(&self) -> usize {
        self.frame_syms
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn role(&self, cell: Cell) -> CellRole {
        self.roles[cell.symbol * self.n_fft + cell.subcarrier]
    }

    /// Pilot cells in symbol-major, ascending-subcarrier order.
    pub fn pilots(&self) -> &[Cell] {
        &self.pilots
    }

    /// Data cells in symbol-major, ascending-subcarrier order. This is the
    /// order modulated points and label bits are placed in.
    pub fn data(&self) -> &[Cell] {
        &self.data
    }

    /// Non-guard subcarriers (shifted indices), ascending.
    pub fn used_subcarriers(&self) -> &[usize] {
        &self.used
    }

    pub fn guard_count(&self) -> usize {
        self.roles.iter().filter(|r| **r == CellRole::Guard).count()
    }

    /// Pilot subcarriers of one symbol, ascending.
    pub fn pilots_in_symbol(&self, symbol: usize) -> impl Iterator<Item = usize> + '_ {
        self.pilots
            .iter()
            .filter(move |c| c.symbol == symbol)
            .map(|c| c.subcarrier)
    }

    /// Flat index into a natural-bin-order `F x N` grid.
    pub fn grid_index(&self, cfg: &OfdmConfig, cell: Cell) -> usize {
        cell.symbol * self.n_fft + cfg.bin_of(cell.subcarrier)
    }
}
