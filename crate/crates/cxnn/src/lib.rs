//! A small reverse-mode neural-network engine covering exactly the layers a
//! learned OFDM receiver needs: dense and kernel-1 real convolution, complex
//! convolution expressed as a doubled real product, circular 2-D complex
//! convolution, batch and layer normalization, activations, complex
//! division and shape plumbing.
//!
//! Complex tensors keep real and imaginary parts interleaved in a trailing
//! axis of extent 2.

pub mod adam;
mod error;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod loss;
mod real;
pub mod tensor;

pub use adam::{Adam, AdamConfig};
pub use error::{NnError, Result};
pub use graph::{Graph, Init, Mode, Node, NodeId, Op, ParamBlock, Tape};
pub use layers::complex::conv1d_real_embedding;
pub use loss::{LossConfig, LossReport};
pub use real::Real;
pub use tensor::Tensor;
