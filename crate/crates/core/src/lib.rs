//! Selectively conditioned forests: exact MAP and Bayesian model averaging
//! over a structure class that allows one intra-set parent and up to `k`
//! condition-set parents per variable, with dynamic Bayesian network and
//! classifier applications.

pub mod bma;
pub mod classify;
pub mod cli;
pub mod data;
pub mod dbn;
pub mod error;
pub mod mdsf;
pub mod scf;
pub mod scoring;

pub use error::{Error, Result};
