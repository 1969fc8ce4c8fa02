use crate::error::{DccnError, Result};
use ofdm_core::OfdmConfig;
use std::fmt;
use std::str::FromStr;

/// Structural alternatives of the basic receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Original,
    /// Dense layer instead of the complex convolution.
    A,
    /// No real convolutions; the skip joins IQ with LRelu(IQ).
    B,
    /// No real convolutions, no LRelu, no skip: demod sees raw IQ.
    C,
    /// No real convolutions; demod sees LRelu(IQ) only.
    D,
    /// Final LRelu replaced by identity.
    E,
    /// Real convolutions kept; demod sees their activation only.
    F,
    /// Dense layer instead of the complex convolution and no real convolutions.
    G,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::Original,
        Variant::A,
        Variant::B,
        Variant::C,
        Variant::D,
        Variant::E,
        Variant::F,
        Variant::G,
    ];

    pub fn dense_transform(self) -> bool {
        matches!(self, Variant::A | Variant::G)
    }

    pub fn real_convs(self) -> bool {
        !matches!(self, Variant::B | Variant::C | Variant::D | Variant::G)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Original => "original",
            Variant::A => "a",
            Variant::B => "b",
            Variant::C => "c",
            Variant::D => "d",
            Variant::E => "e",
            Variant::F => "f",
            Variant::G => "g",
        })
    }
}

impl FromStr for Variant {
    type Err = DccnError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.to_string() == s)
            .ok_or_else(|| DccnError::Config(format!("unknown variant `{s}` (original, a..g)")))
    }
}

/// How each residual estimator sees its two predecessors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstInput {
    /// Concatenation `[prev2, prev1]`, width 4P.
    Concat,
    /// Elementwise `prev2 - prev1`, width 2P.
    Difference,
}

impl fmt::Display for EstInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstInput::Concat => "concat",
            EstInput::Difference => "difference",
        })
    }
}

impl FromStr for EstInput {
    type Err = DccnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concat" => Ok(EstInput::Concat),
            "difference" => Ok(EstInput::Difference),
            _ => Err(DccnError::Config(format!("unknown estimator input `{s}`"))),
        }
    }
}

/// Everything that determines the structure of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct DccnConfig {
    pub ofdm: OfdmConfig,
    pub use_cp: bool,
    pub variant: Variant,
    pub est_input: EstInput,
    pub lrelu_alpha: f64,
    pub bn_momentum: f64,
    pub norm_eps: f64,
    pub div_eps: f64,
}

impl DccnConfig {
    pub fn new(ofdm: OfdmConfig, use_cp: bool) -> Self {
        Self {
            ofdm,
            use_cp,
            variant: Variant::Original,
            est_input: EstInput::Concat,
            lrelu_alpha: 0.2,
            bn_momentum: 0.99,
            norm_eps: 1e-5,
            div_eps: 1e-8,
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn mod_order(&self) -> usize {
        self.ofdm.mod_order
    }

    pub fn validate(&self) -> Result<()> {
        self.ofdm.validate()?;
        if !(1..=4).contains(&self.ofdm.mod_order) {
            return Err(DccnError::Config(format!(
                "modulation order {} not in 1..=4",
                self.ofdm.mod_order
            )));
        }
        Ok(())
    }

    /// Samples per symbol seen by the first transform: `S` with the cyclic
    /// prefix kept, `N` with it sliced off.
    pub fn symbol_width(&self) -> usize {
        if self.use_cp {
            self.ofdm.sym_len
        } else {
            self.ofdm.n_fft
        }
    }

    /// Per-sample input shape `[F, S, 2]`.
    pub fn input_shape(&self) -> [usize; 3] {
        [self.ofdm.frame_syms, self.ofdm.sym_len, 2]
    }
}
