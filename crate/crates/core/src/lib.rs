//! Reconstruction of fermionic two-particle reduced density matrices from
//! partial or shot-noisy element data.
//!
//! The crate is organized around the stages of a reconstruction run:
//!
//! * [`rdm`]: packed spin-sector storage, 1-RDM contraction, energies,
//!   Hartree-Fock 2-RDMs, spectra and rank selection.
//! * [`toy`]: exact diagonalization of small Fock spaces, used as ground
//!   truth throughout.
//! * [`coherence`]: geometric coherence and its minimization over orbital
//!   rotations.
//! * [`completion`]: low-rank PSD completion from sampled elements.
//! * [`measurement`]: Jordan-Wigner Pauli measurements with binomial shot
//!   noise, and shot planning.
//! * [`postprocess`]: restore, trace-normalize, model-correct.
//! * [`pipeline`]: bundle I/O, end-to-end noiseless and noisy runs, reports.

pub mod coherence;
pub mod completion;
pub mod error;
pub mod linalg;
pub mod measurement;
pub mod optim;
pub mod pauli;
pub mod pipeline;
pub mod postprocess;
pub mod rdm;
mod serde_nan;
pub mod toy;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
