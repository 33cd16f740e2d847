//! Machine-learning quantum state tomography of degraded squeezed light.
//!
//! Homodyne quadrature sequences are mapped by a small 1D convolutional
//! network to the squeezing magnitude, squeezing angle and thermal photon
//! number of a squeezed thermal state. The network can be post-training
//! quantized to INT8 and executed by a pure-integer interpreter; both
//! engines feed the same reconstruction, fidelity and benchmark tooling.

pub mod bench;
mod binio;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod nn;
pub mod pipeline;
pub mod quant;

pub use error::{Error, Result};
pub use gaussian::StateParams;
