//! Numerics for the semiclassical mean-field limit of fermions: Hartree-Fock and Vlasov
//! dynamics, the Wigner/Weyl bridge between them, exact few-fermion dynamics and the
//! doubled-Fock-space purification.

pub mod comparison;
pub mod density_matrix;
pub mod error;
pub mod hartree_fock;
pub mod interaction;
pub mod linalg;
pub mod newton;
pub mod spectral;
pub mod spline;
pub mod vlasov;
pub mod wigner;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
