//! Finite-dimensional fermion systems: exact lattice dynamics in fixed particle-number
//! sectors and the doubled Fock space with its Bogoliubov structure.

pub mod fock_doubled;
pub mod quantum_nbody;
pub mod sparse;
