//! Meshes and the constrained divergence-free velocity space.

pub mod element;
pub mod mesh;
pub mod space;

pub use mesh::{generate_mesh, BoundaryFacet, Domain, Mesh};
pub use space::{build_reduced_space, build_reduced_space_with, BoundaryMode, ReducedSpace};
