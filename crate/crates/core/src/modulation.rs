//! Gray-coded BPSK / QPSK / 8-QAM / 16-QAM with the peak constellation power
//! equal to the pilot power (2).
//!
//! Bit `0` of a cell is the most significant bit of the constellation index.

use crate::error::{PhyError, Result};
use crate::grid::ComplexGrid;
use num_complex::Complex64;

/// Two-bit Gray code to amplitude level.
const GRAY4: [f64; 4] = [-3.0, -1.0, 3.0, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    bits: usize,
    points: Vec<Complex64>,
}

impl Constellation {
    pub fn new(m: usize) -> Result<Self> {
        let points: Vec<Complex64> = match m {
            1 => {
                let a = 2f64.sqrt();
                vec![Complex64::new(-a, 0.0), Complex64::new(a, 0.0)]
            }
            2 => {
                let lvl = |b: usize| if b == 0 { 1.0 } else { -1.0 };
                (0..4).map(|i| Complex64::new(lvl(i >> 1), lvl(i & 1))).collect()
            }
            3 => {
                // Two rows of four; peak point (3a, a) has power 10a^2 = 2.
                let a = 0.2f64.sqrt();
                let row = |b: usize| if b == 0 { a } else { -a };
                (0..8)
                    .map(|i| Complex64::new(GRAY4[i & 3] * a, row(i >> 2)))
                    .collect()
            }
            4 => {
                // Corner (3a, 3a) has power 18a^2 = 2.
                let a = 1.0 / 3.0;
                (0..16)
                    .map(|i| Complex64::new(GRAY4[i >> 2] * a, GRAY4[i & 3] * a))
                    .collect()
            }
            _ => return Err(PhyError::UnsupportedModulation(m)),
        };
        Ok(Self { bits: m, points })
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits
    }

    /// Points indexed by their bit pattern.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }

    pub fn peak_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).fold(0.0, f64::max)
    }

    pub fn map(&self, bits: &[u8]) -> Complex64 {
        let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        self.points[idx]
    }

    /// Index of the nearest point (minimum Euclidean distance).
    pub fn slice(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn write_bits(&self, index: usize, out: &mut [u8]) {
        for (j, b) in out.iter_mut().enumerate() {
            *b = ((index >> (self.bits - 1 - j)) & 1) as u8;
        }
    }
}

/// Bits laid out as `(frame, data cell, bit)`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitBlock {
    frames: usize,
    cells: usize,
    bits_per_cell: usize,
    bits: Vec<u8>,
}

impl BitBlock {
    pub fn new(frames: usize, cells: usize, bits_per_cell: usize, bits: Vec<u8>) -> Result<Self> {
        let n = frames * cells * bits_per_cell;
        if bits.len() != n {
            return Err(PhyError::shape(&[frames, cells, bits_per_cell], &[bits.len()]));
        }
        if let Some(index) = bits.iter().position(|&b| b > 1) {
            return Err(PhyError::NonBinary {
                index,
                value: bits[index],
            });
        }
        Ok(Self {
            frames,
            cells,
            bits_per_cell,
            bits,
        })
    }

    pub fn zeros(frames: usize, cells: usize, bits_per_cell: usize) -> Self {
        Self {
            frames,
            cells,
            bits_per_cell,
            bits: vec![0; frames * cells * bits_per_cell],
        }
    }

    pub fn random<R: rand::Rng + ?Sized>(
        frames: usize,
        cells: usize,
        bits_per_cell: usize,
        rng: &mut R,
    ) -> Self {
        let bits = (0..frames * cells * bits_per_cell)
            .map(|_| rng.random::<bool>() as u8)
            .collect();
        Self {
            frames,
            cells,
            bits_per_cell,
            bits,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn bits_per_cell(&self) -> usize {
        self.bits_per_cell
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.frames, self.cells, self.bits_per_cell]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.bits
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.bits
    }

    pub fn frame(&self, f: usize) -> &[u8] {
        let n = self.cells * self.bits_per_cell;
        &self.bits[f * n..(f + 1) * n]
    }

    pub fn concat(blocks: &[BitBlock]) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Ok(Self::zeros(0, 0, 0));
        };
        let mut bits = Vec::new();
        let mut frames = 0;
        for b in blocks {
            if b.cells != first.cells || b.bits_per_cell != first.bits_per_cell {
                return Err(PhyError::shape(&first.shape(), &b.shape()));
            }
            frames += b.frames;
            bits.extend_from_slice(&b.bits);
        }
        Ok(Self {
            frames,
            cells: first.cells,
            bits_per_cell: first.bits_per_cell,
            bits,
        })
    }
}

/// Maps each cell's bits to its constellation point; output dims `[frames, cells]`.
pub fn modulate(bits: &BitBlock, m: usize) -> Result<ComplexGrid> {
    let c = Constellation::new(m)?;
    if bits.bits_per_cell != m {
        return Err(PhyError::shape(&[bits.frames, bits.cells, m], &bits.shape()));
    }
    let pts = bits.bits.chunks_exact(m).map(|b| c.map(b)).collect();
    ComplexGrid::from_complex(&[bits.frames, bits.cells], pts)
}

/// Minimum-distance slicer. The grid's last axis is taken as the cell axis.
pub fn demodulate_hard(points: &ComplexGrid, m: usize) -> Result<BitBlock> {
    let c = Constellation::new(m)?;
    points.check_finite()?;
    let cells = points.row_len();
    let frames = if cells == 0 { 0 } else { points.len() / cells };
    let mut bits = vec![0u8; points.len() * m];
    for (z, out) in points.as_slice().iter().zip(bits.chunks_exact_mut(m)) {
        c.write_bits(c.slice(*z), out);
    }
    Ok(BitBlock {
        frames,
        cells,
        bits_per_cell: m,
        bits,
    })
}
