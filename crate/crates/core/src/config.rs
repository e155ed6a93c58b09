//! TOML problem-definition files.
//!
//! A file describes the mesh (generator parameters or a mesh-file path),
//! one material block per region, boundary conditions, the applied-field
//! program, the time grid, solver tolerances, probes and output paths.
//! See `ProblemConfig` for the schema; the repository README shows complete
//! files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constitutive::MaterialSpec;
use crate::fem::mesh::{load_mesh, merge_meshes, structured_hex_mesh, MeshError, MixedMesh};
use crate::solver::problem::{Probe, Problem, SolverParams};
use crate::solver::schedule::{uniform_grid, AppliedField, DirichletBc, NeumannBc};
use crate::tensor::Vector3;
use crate::visco::{galpha_params, GAlphaParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("config: {0}")]
    Invalid(String),
    #[error("spectral radius: {0}")]
    Visco(#[from] crate::visco::ViscoError),
}

/// One box of a composed mesh.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxSpec {
    #[serde(default)]
    pub origin: [f64; 3],
    pub extents: [f64; 3],
    pub divisions: [usize; 3],
    /// Region tag of the elements of this box.
    #[serde(default)]
    pub region: usize,
    /// Prefix prepended to the box's own set names (xmin, ...).
    #[serde(default)]
    pub set_prefix: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MeshConfig {
    /// Single structured box.
    Box {
        #[serde(default)]
        origin: [f64; 3],
        extents: [f64; 3],
        divisions: [usize; 3],
    },
    /// Union of boxes merged on coincident nodes.
    Boxes {
        parts: Vec<BoxSpec>,
        #[serde(default = "default_merge_tol")]
        merge_tol: f64,
    },
    /// Mesh file in the text format.
    File { path: PathBuf },
}

fn default_merge_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaterialBlock {
    pub region: usize,
    #[serde(flatten)]
    pub spec: MaterialSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub rho_inf: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    /// Write a VTK snapshot every n converged steps (0 = never).
    #[serde(default)]
    pub vtk_every: usize,
    pub vtk_dir: Option<PathBuf>,
    /// Write a checkpoint every n converged steps (0 = never).
    #[serde(default)]
    pub checkpoint_every: usize,
    pub checkpoint: Option<PathBuf>,
}

/// Top-level schema of a problem file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub mesh: MeshConfig,
    #[serde(rename = "material")]
    pub materials: Vec<MaterialBlock>,
    pub schedule: ScheduleConfig,
    #[serde(default, rename = "dirichlet")]
    pub dirichlet: Vec<DirichletBc>,
    #[serde(default, rename = "neumann")]
    pub neumann: Vec<NeumannBc>,
    pub applied_field: Option<AppliedField>,
    #[serde(default)]
    pub solver: Option<SolverParams>,
    #[serde(default, rename = "probe")]
    pub probes: Vec<Probe>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ProblemConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Ok(toml::from_str(&text)?)
    }

    pub fn build_mesh(&self) -> Result<MixedMesh, ConfigError> {
        Ok(match &self.mesh {
            MeshConfig::Box {
                origin,
                extents,
                divisions,
            } => structured_hex_mesh(Vector3(*origin), *extents, *divisions),
            MeshConfig::Boxes { parts, merge_tol } => {
                let mut meshes = Vec::new();
                for p in parts {
                    let mut m =
                        structured_hex_mesh(Vector3(p.origin), p.extents, p.divisions);
                    m.tag_regions(p.region);
                    if !p.set_prefix.is_empty() {
                        m.prefix_sets(&p.set_prefix);
                    }
                    meshes.push(m);
                }
                merge_meshes(meshes, *merge_tol)
            }
            MeshConfig::File { path } => load_mesh(path)?,
        })
    }

    /// Resolves the config into a runnable problem.
    pub fn build(&self) -> Result<Problem, ConfigError> {
        let mesh = self.build_mesh()?;
        let n_regions = self
            .materials
            .iter()
            .map(|m| m.region + 1)
            .max()
            .unwrap_or(0);
        let mut materials: Vec<Option<MaterialSpec>> = vec![None; n_regions];
        for m in &self.materials {
            materials[m.region] = Some(m.spec.clone());
        }
        let materials: Result<Vec<MaterialSpec>, ConfigError> = materials
            .into_iter()
            .enumerate()
            .map(|(i, m)| {
                m.ok_or_else(|| ConfigError::Invalid(format!("region {i} has no material")))
            })
            .collect();
        let ga: GAlphaParams = galpha_params(self.schedule.rho_inf)?;
        let times = uniform_grid(self.schedule.dt, self.schedule.t_end)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(Problem {
            mesh,
            materials: materials?,
            dirichlet: self.dirichlet.clone(),
            neumann: self.neumann.clone(),
            applied_field: self.applied_field,
            times,
            ga,
            params: self.solver.unwrap_or_default(),
            probes: self.probes.clone(),
        })
    }
}
