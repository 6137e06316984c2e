//! Dephasing open-system dynamics with signed rates, and the diffractive
//! cross-section fits that probe a CP-violating decoherence factor φ.
//!
//! * [`qcore`]: dense complex matrices and density matrices with dephasing channels.
//! * [`lindblad`]: deterministic master-equation propagation and rate matrices.
//! * [`trajectories`]: Stratonovich stochastic Schrödinger ensembles.
//! * [`dyson`]: perturbative two-level decoherence gain.
//! * [`symmetry`]: CP / CPT constraints on channel families.
//! * [`diffract`]: single/double diffraction datasets and log-space fits.

pub mod diffract;
pub mod dyson;
pub mod lindblad;
pub mod qcore;
pub mod symmetry;
pub mod trajectories;

pub use qcore::{ComplexMatrix, DensityMatrix, DephasingChannel, StateVector, Tolerances, C64};
