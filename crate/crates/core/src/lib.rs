//! Dissipative Dirac-matrix Kitaev model on the square-lattice bilayer:
//! gauge sectors, free-fermion Liouvillian spectra, exact small-size
//! cross-checks, gap search and perturbative limits.

pub mod error;
pub mod gauge;
pub mod lattice;

pub use error::{Error, Result};
pub mod clifford;
pub mod ed;
pub mod gap_search;
pub mod ladder;
pub mod perturbation;
pub mod spectrum;
