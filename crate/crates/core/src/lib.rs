//! Relativistic Boltzmann collision machinery.
//!
//! Kinematics of elastic two-body collisions, non-cutoff hard-potential
//! kernels, several equivalent integral representations of the collision
//! operator, the linearized operator and its norms, the macroscopic
//! (hydrodynamic) decomposition, a small spectral solver for the linearized
//! equation on the periodic box, and numerical probes of the estimates that
//! connect them.

pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod macroscopic;
pub mod norms;
pub mod quadrature;
pub mod collision;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
