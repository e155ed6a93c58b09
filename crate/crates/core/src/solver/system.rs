//! Global assembly of the block saddle-point system and the sparse direct
//! solve of its Newton corrections.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use rayon::prelude::*;
use thiserror::Error;

use crate::constitutive::MagneticMode;
use crate::fem::element::{element_kernel, BasisTable, ElementError, ElementFields};
use crate::solver::dofmap::DofMap;
use crate::solver::problem::{FieldState, Problem};
use crate::solver::schedule::SurfaceLoad;
use crate::visco::QuadPointState;

#[derive(Debug, Error)]
pub enum SystemError {
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error("singular system: {detail}")]
    Singular { detail: String },
    #[error("linear solve failed verification: relative residual {rel:e} at dof {dof}")]
    Unverified { rel: f64, dof: usize },
}

/// Assembled tangent (free dofs only) plus the full residual vector.
pub struct GlobalSystem {
    pub matrix: SparseColMat<usize, f64>,
    /// Residual over every dof (constrained rows carry reactions).
    pub residual_full: Vec<f64>,
    /// Residual norm over the free dofs.
    pub residual_norm: f64,
    /// Volume-ratio extremes per element from this assembly.
    pub j_ranges: Vec<(f64, f64)>,
    pub n_free: usize,
}

/// Constraint bookkeeping: which dofs are prescribed, and the compressed
/// numbering of the free ones.
pub struct Constraints {
    pub fixed: Vec<bool>,
    pub free_index: Vec<usize>,
    pub free_list: Vec<usize>,
}

impl Constraints {
    pub fn build(problem: &Problem, dofs: &DofMap) -> Result<Self, crate::solver::problem::ProblemError> {
        let mut fixed = vec![false; dofs.total];
        for bc in &problem.dirichlet {
            let nodes = problem.set_nodes(&bc.set)?;
            for n in nodes {
                let dof = match bc.field {
                    crate::solver::schedule::DofField::Ux => dofs.u_dof(n, 0),
                    crate::solver::schedule::DofField::Uy => dofs.u_dof(n, 1),
                    crate::solver::schedule::DofField::Uz => dofs.u_dof(n, 2),
                    crate::solver::schedule::DofField::Phi => dofs.phi_dof(n),
                };
                fixed[dof] = true;
            }
        }
        let mut free_index = vec![usize::MAX; dofs.total];
        let mut free_list = Vec::new();
        for (d, &fx) in fixed.iter().enumerate() {
            if !fx {
                free_index[d] = free_list.len();
                free_list.push(d);
            }
        }
        Ok(Constraints {
            fixed,
            free_index,
            free_list,
        })
    }

    pub fn n_free(&self) -> usize {
        self.free_list.len()
    }
}

/// Writes the prescribed values for time `t` into the field state.
pub fn apply_dirichlet(
    problem: &Problem,
    dofs: &DofMap,
    fields: &mut FieldState,
    t: f64,
) -> Result<(), crate::solver::problem::ProblemError> {
    for bc in &problem.dirichlet {
        for n in problem.set_nodes(&bc.set)? {
            let value = bc.value_at(t, &problem.mesh.nodes[n]);
            match bc.field {
                crate::solver::schedule::DofField::Ux => fields.u[3 * n] = value,
                crate::solver::schedule::DofField::Uy => fields.u[3 * n + 1] = value,
                crate::solver::schedule::DofField::Uz => fields.u[3 * n + 2] = value,
                crate::solver::schedule::DofField::Phi => fields.phi[n] = value,
            }
        }
    }
    let _ = dofs;
    Ok(())
}

/// Assembles the tangent over the free dofs and the full residual at the
/// current iterate. Internal variables in `qp_states` are updated implicitly
/// (elements run in parallel; the scatter is a deterministic ordered pass).
#[allow(clippy::too_many_arguments)]
pub fn assemble(
    problem: &Problem,
    dofs: &DofMap,
    cons: &Constraints,
    fields: &FieldState,
    qp_states: &mut [Vec<QuadPointState>],
    table: &BasisTable,
    t: f64,
    dt: f64,
) -> Result<GlobalSystem, SystemError> {
    let mesh = &problem.mesh;
    let coupled = dofs.coupled;
    let b_applied = problem
        .applied_field
        .map(|f| f.value(t))
        .unwrap_or(crate::tensor::Vector3::ZERO);

    let blocks: Vec<_> = mesh
        .elems_u
        .par_iter()
        .enumerate()
        .zip(qp_states.par_iter_mut())
        .map(|((e, _), qps)| {
            let spec = &problem.materials[mesh.region_tags[e]];
            let fields_e = ElementFields::gather(
                mesh,
                e,
                &fields.u,
                |n| fields.p[dofs.pressure_slot[n].expect("pressure node")],
                &fields.phi,
            );
            element_kernel(e, &fields_e, spec, table, qps, &problem.ga, dt, &b_applied)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut residual = vec![0.0; dofs.total];
    let mut j_ranges = Vec::with_capacity(blocks.len());
    // generous estimate: the u-u block dominates
    let mut triplets: Vec<Triplet<usize, usize, f64>> = Vec::new();
    triplets.reserve(blocks.len() * (81 * 81 + 2 * 81 * 8 + 64 + 2 * 81 * 27 + 27 * 27));

    for (e, b) in blocks.iter().enumerate() {
        j_ranges.push(b.j_range);
        let conn_u = &mesh.elems_u[e];
        let conn_p = &mesh.elems_p[e];
        let gu =
            |a: usize, i: usize| dofs.u_dof(conn_u[a], i);
        let gp = |b_: usize| dofs.p_dof(conn_p[b_]);

        for a in 0..27 {
            for i in 0..3 {
                residual[gu(a, i)] += b.r_u[3 * a + i];
            }
        }
        for a in 0..8 {
            residual[gp(a)] += b.r_p[a];
        }
        let soft = coupled
            && matches!(
                problem.materials[mesh.region_tags[e]].magnetic,
                MagneticMode::Soft { .. }
            );
        if soft {
            for a in 0..27 {
                residual[dofs.phi_dof(conn_u[a])] += b.r_phi[a];
            }
        }

        let mut push = |row: usize, col: usize, v: f64| {
            if v != 0.0 && !cons.fixed[row] && !cons.fixed[col] {
                triplets.push(Triplet::new(cons.free_index[row], cons.free_index[col], v));
            }
        };
        for a in 0..27 {
            for i in 0..3 {
                let row = gu(a, i);
                for bb in 0..27 {
                    for k in 0..3 {
                        push(row, gu(bb, k), b.k_uu.get(3 * a + i, 3 * bb + k));
                    }
                }
                for bb in 0..8 {
                    let v = b.k_up.get(3 * a + i, bb);
                    push(row, gp(bb), v);
                    push(gp(bb), row, v); // K_pu = K_up^t by construction
                }
            }
        }
        for a in 0..8 {
            for bb in 0..8 {
                push(gp(a), gp(bb), b.k_pp.get(a, bb));
            }
        }
        if soft {
            for a in 0..27 {
                let pa = dofs.phi_dof(conn_u[a]);
                for bb in 0..27 {
                    push(pa, dofs.phi_dof(conn_u[bb]), b.k_phiphi.get(a, bb));
                    for k in 0..3 {
                        push(gu(bb, k), pa, b.k_uphi.get(3 * bb + k, a));
                        push(pa, gu(bb, k), b.k_phiu.get(a, 3 * bb + k));
                    }
                }
            }
        }
    }

    // surface loads (reference configuration, programmable magnitude)
    for bc in &problem.neumann {
        let faces = mesh
            .face_sets
            .get(&bc.set)
            .expect("validated face set");
        match &bc.load {
            SurfaceLoad::Traction { direction, magnitude } => {
                let tr = *direction * magnitude.value(t);
                for &(e, f) in faces {
                    let v = crate::fem::element::face_traction_vector(mesh, e, f, tr)
                        .map_err(ElementError::Quadrature)?;
                    for (a, &n) in mesh.elems_u[e].iter().enumerate() {
                        for i in 0..3 {
                            residual[dofs.u_dof(n, i)] -= v[3 * a + i];
                        }
                    }
                }
            }
            SurfaceLoad::MagneticSurfaceDensity { magnitude } => {
                let w = magnitude.value(t);
                for &(e, f) in faces {
                    let v = crate::fem::element::face_scalar_vector(mesh, e, f, w)
                        .map_err(ElementError::Quadrature)?;
                    for (a, &n) in mesh.elems_u[e].iter().enumerate() {
                        residual[dofs.phi_dof(n)] -= v[a];
                    }
                }
            }
        }
    }

    let n_free = cons.n_free();
    let matrix = SparseColMat::try_new_from_triplets(n_free, n_free, &triplets)
        .map_err(|e| SystemError::Singular {
            detail: format!("assembly produced an invalid sparse matrix: {e:?}"),
        })?;
    let residual_norm = cons
        .free_list
        .iter()
        .map(|&d| residual[d] * residual[d])
        .sum::<f64>()
        .sqrt();
    Ok(GlobalSystem {
        matrix,
        residual_full: residual,
        residual_norm,
        j_ranges,
        n_free,
    })
}

/// Reusable factorisation context: the symbolic analysis survives across
/// Newton iterations and steps because the sparsity pattern is fixed.
#[derive(Default)]
pub struct LinearSolver {
    symbolic: Option<SymbolicLu<usize>>,
}

impl LinearSolver {
    /// Solves `K dx = -r_free`, verifying the solution by multiply-back and
    /// refining once or twice if needed. The relative residual must reach
    /// 1e-10 (with slack for accumulated scale) or the system is declared
    /// singular.
    pub fn solve(
        &mut self,
        sys: &GlobalSystem,
        cons: &Constraints,
    ) -> Result<Vec<f64>, SystemError> {
        let n = sys.n_free;
        if n == 0 {
            return Ok(Vec::new());
        }
        if self.symbolic.is_none() {
            self.symbolic = Some(SymbolicLu::try_new(sys.matrix.symbolic()).map_err(
                |e| SystemError::Singular {
                    detail: format!("symbolic analysis failed: {e:?}"),
                },
            )?);
        }
        let lu = Lu::try_new_with_symbolic(
            self.symbolic.clone().unwrap(),
            sys.matrix.as_ref(),
        )
        .map_err(|e| SystemError::Singular {
            detail: format!("numeric factorization failed: {e:?}"),
        })?;

        let rhs = faer::Mat::from_fn(n, 1, |i, _| -sys.residual_full[cons.free_list[i]]);
        let mut x = lu.solve(&rhs);

        // iterative refinement toward ||K x + r|| <= 1e-10 ||r||
        for _ in 0..2 {
            let (rel, _) = self.linear_residual(sys, cons, &x);
            if rel <= 1e-10 {
                break;
            }
            let res = self.residual_vec(sys, cons, &x);
            let correction_rhs = faer::Mat::from_fn(n, 1, |i, _| -res[i]);
            let dx = lu.solve(&correction_rhs);
            for i in 0..n {
                x[(i, 0)] += dx[(i, 0)];
            }
        }
        let (rel, worst) = self.linear_residual(sys, cons, &x);
        if !rel.is_finite() || rel > 1e-8 {
            return Err(SystemError::Unverified {
                rel,
                dof: cons.free_list.get(worst).copied().unwrap_or(0),
            });
        }
        Ok((0..n).map(|i| x[(i, 0)]).collect())
    }

    /// `K x + r_free` over the free dofs.
    fn residual_vec(
        &self,
        sys: &GlobalSystem,
        cons: &Constraints,
        x: &faer::Mat<f64>,
    ) -> Vec<f64> {
        let n = sys.n_free;
        let mut out: Vec<f64> = (0..n)
            .map(|i| sys.residual_full[cons.free_list[i]])
            .collect();
        // y += K x, CSC traversal
        let sym = sys.matrix.symbolic();
        let vals = sys.matrix.val();
        for col in 0..n {
            let xc = x[(col, 0)];
            if xc == 0.0 {
                continue;
            }
            let rng = sym.col_range(col);
            for idx in rng {
                out[sym.row_idx()[idx]] += vals[idx] * xc;
            }
        }
        out
    }

    fn linear_residual(
        &self,
        sys: &GlobalSystem,
        cons: &Constraints,
        x: &faer::Mat<f64>,
    ) -> (f64, usize) {
        let res = self.residual_vec(sys, cons, x);
        let norm = res.iter().map(|v| v * v).sum::<f64>().sqrt();
        let worst = res
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        (norm / sys.residual_norm.max(1e-300), worst)
    }

    pub fn reset(&mut self) {
        self.symbolic = None;
    }
}
