//! Truncated Fock-basis numerics: squeezing operator, density matrices,
//! Uhlmann fidelity, Wigner functions and homodyne distributions.

pub mod density;
pub mod matrix;
pub mod quadrature;
pub mod wigner;

pub use density::{
    annihilation_matrix, density_from_params, mean_photon, squeeze_operator, thermal_state,
    uhlmann_fidelity, DensityMatrix, TruncationWarning, DEFAULT_DIM,
};
pub use matrix::ComplexMatrix;
pub use quadrature::{oscillator_eigenfunctions, quadrature_pdf_fock};
pub use wigner::wigner_fock;
