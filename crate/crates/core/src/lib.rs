//! Simulation of laser-bound atom pairs in two shifted optical lattices:
//! lattice bands and Wannier functions, the dipole-dipole coupling, exact
//! two-atom diagonalization, EPR-type correlation measures and the
//! time-dependent preparation protocol.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod band_structure;
pub mod cli;
pub mod distributions;
pub mod error;
pub mod lanczos;
pub mod liddi;
pub mod parameters;
pub mod protocol;
pub mod two_atom;

pub use error::{Error, Result};
