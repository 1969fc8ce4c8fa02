use crate::error::{PhyError, Result};
use num_complex::Complex64;

/// Frame parameters of the OFDM system.
///
/// The defaults are the evaluated 10 Msps configuration: 64 subcarriers,
/// a 16-sample cyclic prefix, 8 symbols per frame, 10 guard subcarriers and
/// 64 scattered pilots per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmConfig {
    pub n_fft: usize,
    pub cp_len: usize,
    pub sym_len: usize,
    pub frame_syms: usize,
    pub guard_count: usize,
    pub pilot_cells: usize,
    pub data_cells: usize,
    pub mod_order: usize,
    pub pilot_value: Complex64,
    pub papr_limit_db: f64,
    pub sample_rate_hz: f64,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            n_fft: 64,
            cp_len: 16,
            sym_len: 80,
            frame_syms: 8,
            guard_count: 10,
            pilot_cells: 64,
            data_cells: 368,
            mod_order: 2,
            pilot_value: Complex64::new(1.0, 1.0),
            papr_limit_db: 9.0,
            sample_rate_hz: 1e7,
        }
    }
}

impl OfdmConfig {
    pub fn with_mod_order(mut self, m: usize) -> Self {
        self.mod_order = m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(PhyError::Config(msg));
        if self.n_fft < 4 || self.n_fft % 2 != 0 {
            return err(format!("n_fft must be even and >= 4, got {}", self.n_fft));
        }
        if self.sym_len != self.n_fft + self.cp_len {
            return err(format!(
                "sym_len {} != n_fft {} + cp_len {}",
                self.sym_len, self.n_fft, self.cp_len
            ));
        }
        if self.cp_len >= self.n_fft {
            return err(format!("cp_len {} must be shorter than n_fft", self.cp_len));
        }
        if self.guard_count < 2 || self.guard_count % 2 != 0 || self.guard_count >= self.n_fft {
            return err(format!(
                "guard_count {} must be even, >= 2 and < n_fft",
                self.guard_count
            ));
        }
        if self.frame_syms == 0 {
            return err("frame_syms must be positive".into());
        }
        let cells = self.frame_syms * self.used_subcarriers();
        if self.data_cells + self.pilot_cells != cells {
            return err(format!(
                "data_cells {} + pilot_cells {} != frame_syms * (n_fft - guard_count) = {}",
                self.data_cells, self.pilot_cells, cells
            ));
        }
        if self.pilot_cells % self.frame_syms != 0 {
            return err(format!(
                "pilot_cells {} must be a multiple of frame_syms {}",
                self.pilot_cells, self.frame_syms
            ));
        }
        if !(1..=4).contains(&self.mod_order) {
            return Err(PhyError::UnsupportedModulation(self.mod_order));
        }
        if self.pilot_value.norm_sqr() == 0.0 || !self.pilot_value.is_finite() {
            return err("pilot_value must be finite and nonzero".into());
        }
        if !(self.papr_limit_db.is_finite() && self.papr_limit_db > 0.0) {
            return err(format!(
                "papr_limit_db must be positive, got {}",
                self.papr_limit_db
            ));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return err(format!(
                "sample_rate_hz must be positive, got {}",
                self.sample_rate_hz
            ));
        }
        Ok(())
    }

    /// Non-guard subcarriers per symbol.
    pub fn used_subcarriers(&self) -> usize {
        self.n_fft - self.guard_count
    }

    pub fn pilots_per_symbol(&self) -> usize {
        self.pilot_cells / self.frame_syms
    }

    /// Time-domain samples per frame.
    pub fn frame_len(&self) -> usize {
        self.frame_syms * self.sym_len
    }

    pub fn bits_per_frame(&self) -> usize {
        self.data_cells * self.mod_order
    }

    /// Guards on each spectrum edge (the remaining two sit around DC).
    pub fn edge_guard(&self) -> usize {
        (self.guard_count - 2) / 2
    }

    /// DFT bin holding FFT-shifted subcarrier `shifted`.
    pub fn bin_of(&self, shifted: usize) -> usize {
        (shifted + self.n_fft / 2) % self.n_fft
    }

    /// Inverse of [`bin_of`](Self::bin_of).
    pub fn shifted_of(&self, bin: usize) -> usize {
        (bin + self.n_fft / 2) % self.n_fft
    }

    pub fn pilot_power(&self) -> f64 {
        self.pilot_value.norm_sqr()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_consistent() {
        let cfg = OfdmConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.sym_len, cfg.n_fft + cfg.cp_len);
        assert_eq!(cfg.data_cells + cfg.pilot_cells, 8 * 54);
        assert_eq!(cfg.edge_guard() * 2 + 2, cfg.guard_count);
        assert_eq!(cfg.pilots_per_symbol(), 8);
    }

    #[test]
    fn rejects_cell_budget_mismatch() {
        let cfg = OfdmConfig {
            data_cells: 367,
            ..OfdmConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(PhyError::Config(_))));
    }

    #[test]
    fn rejects_bad_symbol_length() {
        let cfg = OfdmConfig {
            sym_len: 81,
            ..OfdmConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn shift_maps_round_trip() {
        let cfg = OfdmConfig::default();
        assert_eq!(cfg.bin_of(32), 0);
        assert_eq!(cfg.bin_of(31), 63);
        for k in 0..cfg.n_fft {
            assert_eq!(cfg.shifted_of(cfg.bin_of(k)), k);
        }
    }
}
