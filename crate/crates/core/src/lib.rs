//! Exact determinantal moments, orthogonal-polynomial moment inversion and
//! rational separability probabilities for induced generalized two-qubit
//! ensembles.

pub mod exactnum;
pub mod moments;
pub mod inversion;
pub mod closedform;
pub mod recon;
pub mod cli;
pub mod serde_rational;
