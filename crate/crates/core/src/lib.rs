pub mod conditional;
pub mod datasynth;
pub mod error;
pub mod fock;
pub mod gaussian_model;
pub mod quadrature;
pub mod spectrum_fit;
pub mod tomography;

pub use error::{Error, Result};
