//! Forward and backward kernels over flat row-major buffers. The graph
//! module owns shapes and wiring; these functions only see row counts.

pub mod activation;
pub mod complex;
pub mod dense;
pub mod norm;
