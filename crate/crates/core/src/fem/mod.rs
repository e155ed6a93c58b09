//! Spatial discretisation: bases, quadrature, meshes and element kernels.

pub mod basis;
pub mod element;
pub mod mesh;
pub mod quadrature;

pub use element::{element_kernel, BasisTable, ElementBlocks, ElementFields};
pub use mesh::{merge_meshes, structured_hex_mesh, MixedMesh};
pub use quadrature::gauss_rule;
