//! Frölicher spectral sequences and adiabatic-limit spectra on invariant-form
//! models of compact complex manifolds.
//!
//! The pipeline: [`complex_model`] builds the bigraded complex from structure
//! constants, [`metric_geometry`] puts a Hermitian metric on it,
//! [`laplacians`] assembles the operators, [`spectral_sequence`] computes the
//! pages, [`adiabatic_analysis`] sweeps the spectrum of Δ_h as h → 0 and
//! [`inequality_checks`] certifies operator inequalities as PSD gaps.

pub mod adiabatic_analysis;
pub mod catalog;
pub mod complex_model;
pub mod error;
pub mod inequality_checks;
pub mod laplacians;
pub mod linalg;
pub mod metric_geometry;
pub mod report;
pub mod scalar;
pub mod spectral_sequence;

pub use error::{Error, Result};
