//! Global assembly, constraints, Newton stepping and run orchestration.

pub mod checkpoint;
pub mod dofmap;
pub mod newton;
pub mod problem;
pub mod schedule;
pub mod system;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use dofmap::DofMap;
pub use newton::{RunResult, SolverError, StepRecord, Stepper};
pub use problem::{FieldState, Probe, Problem, SolverParams};
pub use schedule::{
    uniform_grid, AppliedField, DirichletBc, DofField, NeumannBc, Program, SurfaceLoad,
};
