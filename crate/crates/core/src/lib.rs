//! Graph-convolutional Galerkin networks.
//!
//! A Chebyshev graph convolutional network maps mesh node coordinates to
//! nodal finite element coefficients. The training loss is the norm of the
//! Galerkin weak-form residual, restricted to the unconstrained degrees of
//! freedom, so essential boundary conditions (and, optionally, observations)
//! hold exactly at every iterate. Unknown PDE parameters and boundary values
//! can be trained jointly with the network.

pub mod cases;
pub mod checkpoint;
pub mod error;
pub mod fe;
pub mod gcn;
pub mod mesh;
pub mod oracle;
pub mod physics;
pub mod problem;
pub mod report;
pub mod residual;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
