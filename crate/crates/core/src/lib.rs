//! Discrete solver and verification harness for the stationary convective
//! Brinkman-Forchheimer extended Darcy model with a nonmonotone slip boundary
//! condition, posed as a hemivariational inequality on a divergence-free
//! finite element space.

pub mod constants;
pub mod error;
pub mod forcing;
pub mod forms;
pub mod geometry;
pub mod inner_solver;
pub mod linalg;
pub mod oracle;
pub mod outer_solver;
pub mod par;
pub mod quadrature;
pub mod superpotential;

pub use error::{Error, Result};
