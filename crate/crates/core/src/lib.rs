//! Simulation laboratory for products of independent iid random matrices.
//!
//! The crate samples iid factor matrices, forms their scaled product and its
//! block-cyclic linearization, computes eigenvalue and singular-value spectra
//! with in-tree dense solvers, and compares Monte Carlo fluctuations of linear
//! eigenvalue statistics with their closed-form Gaussian limits.

pub mod ensembles;
pub mod error;
pub mod io;
pub mod linalg;
pub mod linearize;
pub mod matrix;
pub mod mc;
pub mod rng;
pub mod spectra;
pub mod stats;
pub mod theory;

pub use error::{Error, Result};
pub use matrix::RealMatrix;
pub use num_complex::Complex64;
