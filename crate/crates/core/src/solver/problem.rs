//! Problem definition: mesh, materials, boundary conditions, schedule,
//! solver parameters and output probes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constitutive::{MagneticMode, MaterialSpec};
use crate::fem::mesh::MixedMesh;
use crate::solver::schedule::{
    validate_grid, AppliedField, DirichletBc, NeumannBc, ScheduleError,
};
use crate::visco::GAlphaParams;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("region {0} has no material")]
    MissingMaterial(usize),
    #[error("coupled problems need a soft magnetic mode on every region (region {0} is not)")]
    MixedCoupling(usize),
    #[error("unknown node or face set '{0}'")]
    UnknownSet(String),
    #[error("material: {0}")]
    Material(#[from] crate::constitutive::ConstitutiveError),
    #[error("schedule: {0}")]
    Schedule(#[from] ScheduleError),
    #[error("probe '{0}' found no node")]
    ProbeNode(String),
}

/// Newton/stepping tolerances. Convergence is
/// `||R|| <= tol_abs  or  ||R||/||R0|| <= tol_rel`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverParams {
    pub tol_rel: f64,
    pub tol_abs: f64,
    pub max_iter: usize,
    /// Successive step halvings allowed before giving up.
    pub max_halvings: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            tol_rel: 1e-8,
            tol_abs: 1e-10,
            max_iter: 25,
            max_halvings: 6,
        }
    }
}

/// A named scalar recorded per converged step.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Probe {
    /// Displacement component of the node nearest `at`.
    PointDisp { name: String, at: [f64; 3], comp: usize },
    /// Potential of the node nearest `at`.
    PointPotential { name: String, at: [f64; 3] },
    /// Two columns `<name>_min`, `<name>_max`: volume-ratio extremes over
    /// all quadrature points.
    JRange { name: String },
    /// Sum of reaction forces (component `comp`) over a constrained set.
    ReactionSum { name: String, set: String, comp: usize },
}

impl Probe {
    pub fn columns(&self) -> Vec<String> {
        match self {
            Probe::PointDisp { name, .. }
            | Probe::PointPotential { name, .. }
            | Probe::ReactionSum { name, .. } => vec![name.clone()],
            Probe::JRange { name } => vec![format!("{name}_min"), format!("{name}_max")],
        }
    }
}

/// A complete boundary-value problem over a pseudo-time grid.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: MixedMesh,
    /// Material per region tag (index = tag).
    pub materials: Vec<MaterialSpec>,
    pub dirichlet: Vec<DirichletBc>,
    pub neumann: Vec<NeumannBc>,
    pub applied_field: Option<AppliedField>,
    /// Converged-step targets (strictly increasing, first > 0).
    pub times: Vec<f64>,
    pub ga: GAlphaParams,
    pub params: SolverParams,
    pub probes: Vec<Probe>,
    /// Pins the pressure dof nearest this point to zero (datum for fully
    /// enclosed incompressible problems, where pressure is otherwise only
    /// determined up to a constant).
    pub pin_pressure: Option<[f64; 3]>,
}

impl Problem {
    /// Whether the potential field is part of the unknowns.
    pub fn coupled(&self) -> bool {
        self.materials
            .iter()
            .any(|m| matches!(m.magnetic, MagneticMode::Soft { .. }))
    }

    /// Nodes of a named set; face sets resolve to the union of their nodes.
    pub fn set_nodes(&self, name: &str) -> Result<Vec<usize>, ProblemError> {
        if let Some(set) = self.mesh.node_sets.get(name) {
            return Ok(set.clone());
        }
        if self.mesh.face_sets.contains_key(name) {
            return Ok(self.mesh.face_set_nodes(name));
        }
        Err(ProblemError::UnknownSet(name.to_string()))
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        for (tag, _) in self.mesh.region_tags.iter().enumerate() {
            let r = self.mesh.region_tags[tag];
            if r >= self.materials.len() {
                return Err(ProblemError::MissingMaterial(r));
            }
        }
        for m in &self.materials {
            m.validate()?;
        }
        if self.coupled() {
            for (i, m) in self.materials.iter().enumerate() {
                if !matches!(m.magnetic, MagneticMode::Soft { .. }) {
                    return Err(ProblemError::MixedCoupling(i));
                }
            }
        }
        validate_grid(&self.times)?;
        for bc in &self.dirichlet {
            bc.program.validate()?;
            self.set_nodes(&bc.set)?;
        }
        for bc in &self.neumann {
            if !self.mesh.face_sets.contains_key(&bc.set) {
                return Err(ProblemError::UnknownSet(bc.set.clone()));
            }
        }
        Ok(())
    }

    /// Index of the mesh node nearest to a point.
    pub fn nearest_node(&self, at: [f64; 3]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, n) in self.mesh.nodes.iter().enumerate() {
            let d = (n[0] - at[0]).powi(2) + (n[1] - at[1]).powi(2) + (n[2] - at[2]).powi(2);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// Nodal unknowns of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    /// Interleaved displacements, `3 * n_nodes`.
    pub u: Vec<f64>,
    /// Pressures by slot, `n_pressure`.
    pub p: Vec<f64>,
    /// Potentials by node (empty when uncoupled).
    pub phi: Vec<f64>,
}

impl FieldState {
    pub fn zeros(n_nodes: usize, n_pressure: usize, coupled: bool) -> Self {
        FieldState {
            u: vec![0.0; 3 * n_nodes],
            p: vec![0.0; n_pressure],
            phi: if coupled { vec![0.0; n_nodes] } else { Vec::new() },
        }
    }
}
