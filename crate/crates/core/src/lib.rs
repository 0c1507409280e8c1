//! Wavepacket dynamics engine for vibrational energy flow in a nonrotating
//! triatomic molecule, formulated in valence coordinates (two bond lengths
//! and the bending angle).
//!
//! The crate builds DVR grids, assembles the kinetic operator and a
//! Morse-cosine potential surface as sum-of-products operators, propagates
//! wavepackets either exactly (short-iterative Krylov) or with a low-rank
//! MCTDH ansatz, and computes the diagnostics used to characterize
//! intramolecular energy redistribution: local-mode energies, populations
//! in quantum-number space, spectral functions, entanglement entropies,
//! dissociation probabilities, and microcanonical averages.

pub mod checkpoint;
pub mod config;
pub mod constants;
pub mod diagnostics;
pub mod eigensolver;
pub mod error;
pub mod grid;
pub mod hamiltonian;
pub mod linalg;
pub mod pes;
pub mod propagator;
pub mod runner;
pub mod statmech;
mod tensor;
pub mod wavefunction;

pub use error::{Error, Result};
