//! Numerical library for the spectral side of Bogoliubov theory in trapped
//! Bose gases: scattering-length ODEs, Gross-Pitaevskii minimization,
//! excitation operators and their spectra, correlation kernels, quadratic
//! bosonic Hamiltonian diagonalization with a brute-force Fock-space
//! oracle, and the second-order ground-state energy correction evaluated by
//! two independent routes.

pub mod error;
pub mod linalg;
pub mod quadrature;
pub mod basis;
pub mod gp;
pub mod operators;
pub mod bogo;
pub mod kernels;
pub mod fock;
pub mod ebog;
pub mod scattering;
pub mod json;
pub mod config;
pub mod io;
pub mod validate;
pub mod pipeline;

pub use error::{Error, Result};
