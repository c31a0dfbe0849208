//! Homodyne tomography: loss-aware quadrature POVM and unbinned
//! maximum-likelihood reconstruction.

mod maxlik;
mod povm;

pub use maxlik::{
    average_reconstructions, likelihood, reconstruct, Diagnostics, MaxLikOptions, ReconstructionResult, MIN_RECORDS,
    PROBABILITY_FLOOR,
};
pub use povm::{radial_element_direct, PovmGrid, QuadraturePovm};

/// Build the measurement operators on the default grid for `n_max`.
pub fn build_povm(n_max: usize, eta: f64) -> crate::Result<QuadraturePovm> {
    QuadraturePovm::with_defaults(n_max, eta)
}
