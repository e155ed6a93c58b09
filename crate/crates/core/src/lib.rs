//! Mixed finite elements for magneto-active polymers at finite strain.
//!
//! The crate implements a displacement–pressure formulation for permanently
//! magnetised (hard) elastomers and a displacement–pressure–potential
//! formulation for magnetisable (soft) elastomers, both on quadratic
//! Bernstein hexahedra paired with a continuous trilinear pressure field.
//! Truly incompressible and compressible material behaviour share one code
//! path through a pressure energy linearised about the previous load step,
//! and finite-strain viscoelasticity is integrated implicitly with a
//! second-order generalised-alpha scheme.
//!
//! Layering, bottom up:
//! - [`tensor`]: fixed-size vectors/tensors and deformation measures,
//! - [`constitutive`]: energies, stresses, analytic tangents, FD oracle,
//! - [`visco`]: internal-variable integration per quadrature point,
//! - [`fem`]: Bernstein bases, quadrature, mixed meshes, element kernels,
//! - [`solver`]: assembly, Newton iteration, load schedules, probes,
//! - [`config`]: the TOML problem-definition format.

pub mod config;
pub mod constitutive;
pub mod fem;
pub mod solver;
pub mod tensor;
pub mod visco;

pub use constitutive::{MagneticMode, MaterialSpec, StressTangent};
pub use tensor::{DeformationState, Tensor2, Vector3};
pub use visco::{GAlphaParams, QuadPointState};
