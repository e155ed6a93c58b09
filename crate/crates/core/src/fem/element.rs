//! Element-level residuals and block stiffness matrices.
//!
//! One 27-node hexahedron carries 81 displacement dofs, 8 pressure dofs and
//! (in the coupled case) 27 potential dofs. Stiffness and residual integrals
//! that live on the current configuration use the deformed volume element,
//! the pressure-constraint blocks the reference one. Quadrature is the
//! 3x3x3 Gauss rule for every block.

use thiserror::Error;

use crate::constitutive::{
    assemble_point_response, pressure_constants, vidx, ConstitutiveError, MagneticMode,
    MaterialSpec,
};
use crate::fem::basis::{bq1_basis, bq2_basis};
use crate::fem::mesh::MixedMesh;
use crate::fem::quadrature::{gauss_rule, gauss_rule_2d, QuadPoint, QuadratureError};
use crate::tensor::{det3, inv3, kinematics, Tensor2, Vector3};
use crate::visco::{update_internal, GAlphaParams, QuadPointState};

pub const N_U: usize = 27;
pub const N_P: usize = 8;
pub const U_DOFS: usize = 81;

#[derive(Debug, Error)]
pub enum ElementError {
    #[error("element {elem}, quadrature point {qp}: non-positive jacobian (det = {det:e})")]
    NonPositiveJacobian { elem: usize, qp: usize, det: f64 },
    #[error("element {elem}, quadrature point {qp}: {source}")]
    Constitutive {
        elem: usize,
        qp: usize,
        source: ConstitutiveError,
    },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Column-major-free tiny dense matrix (row-major `Vec`).
#[derive(Debug, Clone)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Dense {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] += v;
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        debug_assert_eq!(self.rows, self.cols);
        let mut m = 0.0f64;
        for r in 0..self.rows {
            for c in 0..r {
                m = m.max((self.get(r, c) - self.get(c, r)).abs());
            }
        }
        m
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// All blocks produced by one element. The potential blocks are zero-sized
/// unless the element's material is soft-magnetic.
#[derive(Debug, Clone)]
pub struct ElementBlocks {
    pub k_uu: Dense,
    pub k_up: Dense,
    pub k_pp: Dense,
    pub k_uphi: Dense,
    pub k_phiu: Dense,
    pub k_phiphi: Dense,
    pub r_u: [f64; U_DOFS],
    pub r_p: [f64; N_P],
    pub r_phi: [f64; N_U],
    /// Extremes of the volume ratio over the element's quadrature points.
    pub j_range: (f64, f64),
}

/// Basis values tabulated at the quadrature points of one rule.
pub struct BasisTable {
    pub points: Vec<QuadPoint>,
    pub bq2: Vec<([f64; N_U], [[f64; 3]; N_U])>,
    pub bq1: Vec<([f64; N_P], [[f64; 3]; N_P])>,
}

impl BasisTable {
    pub fn new(points_per_dir: usize) -> Result<Self, QuadratureError> {
        let points = gauss_rule(points_per_dir)?;
        let bq2 = points.iter().map(|q| bq2_basis(q.coord)).collect();
        let bq1 = points.iter().map(|q| bq1_basis(q.coord)).collect();
        Ok(BasisTable { points, bq2, bq1 })
    }
}

/// Per-element field values gathered from the global vectors.
pub struct ElementFields {
    pub coords: [Vector3; N_U],
    pub disp: [Vector3; N_U],
    pub pressure: [f64; N_P],
    pub potential: [f64; N_U],
}

impl ElementFields {
    pub fn gather(
        mesh: &MixedMesh,
        elem: usize,
        u: &[f64],
        p_by_node: impl Fn(usize) -> f64,
        phi: &[f64],
    ) -> Self {
        let conn = &mesh.elems_u[elem];
        let mut coords = [Vector3::ZERO; N_U];
        let mut disp = [Vector3::ZERO; N_U];
        let mut potential = [0.0; N_U];
        for (a, &n) in conn.iter().enumerate() {
            coords[a] = mesh.nodes[n];
            disp[a] = Vector3::new(u[3 * n], u[3 * n + 1], u[3 * n + 2]);
            if !phi.is_empty() {
                potential[a] = phi[n];
            }
        }
        let mut pressure = [0.0; N_P];
        for (b, &n) in mesh.elems_p[elem].iter().enumerate() {
            pressure[b] = p_by_node(n);
        }
        ElementFields {
            coords,
            disp,
            pressure,
            potential,
        }
    }
}

/// Evaluates residuals and stiffness blocks of one element at the current
/// fields and updates the quadrature-point internal variables implicitly.
#[allow(clippy::too_many_arguments)]
pub fn element_kernel(
    elem: usize,
    fields: &ElementFields,
    spec: &MaterialSpec,
    table: &BasisTable,
    qp_states: &mut [QuadPointState],
    ga: &GAlphaParams,
    dt: f64,
    b_applied: &Vector3,
) -> Result<ElementBlocks, ElementError> {
    let soft = matches!(spec.magnetic, MagneticMode::Soft { .. });
    let taus = spec.taus();
    let mut blocks = ElementBlocks {
        k_uu: Dense::zeros(U_DOFS, U_DOFS),
        k_up: Dense::zeros(U_DOFS, N_P),
        k_pp: Dense::zeros(N_P, N_P),
        k_uphi: Dense::zeros(if soft { U_DOFS } else { 0 }, if soft { N_U } else { 0 }),
        k_phiu: Dense::zeros(if soft { N_U } else { 0 }, if soft { U_DOFS } else { 0 }),
        k_phiphi: Dense::zeros(if soft { N_U } else { 0 }, if soft { N_U } else { 0 }),
        r_u: [0.0; U_DOFS],
        r_p: [0.0; N_P],
        r_phi: [0.0; N_U],
        j_range: (f64::INFINITY, f64::NEG_INFINITY),
    };
    debug_assert_eq!(qp_states.len(), table.points.len());

    for (q, quad) in table.points.iter().enumerate() {
        let (_, grads_u) = &table.bq2[q];
        let (vals_p, _) = &table.bq1[q];

        // geometry map on the reference configuration
        let mut jac0 = Tensor2::ZERO;
        for a in 0..N_U {
            for m in 0..3 {
                for n in 0..3 {
                    *&mut jac0.0[3 * m + n] += fields.coords[a][m] * grads_u[a][n];
                }
            }
        }
        let det0 = det3(&jac0);
        if det0 <= 0.0 {
            return Err(ElementError::NonPositiveJacobian {
                elem,
                qp: q,
                det: det0,
            });
        }
        let jac0_inv_t = inv3(&jac0)
            .map_err(|_| ElementError::NonPositiveJacobian {
                elem,
                qp: q,
                det: det0,
            })?
            .transpose();
        let mut grad_x_ref = [[0.0f64; 3]; N_U];
        for a in 0..N_U {
            let g = jac0_inv_t.apply(&Vector3(grads_u[a]));
            grad_x_ref[a] = g.0;
        }

        // deformation gradient and state
        let mut f = Tensor2::IDENTITY;
        for a in 0..N_U {
            for i in 0..3 {
                for jj in 0..3 {
                    *&mut f.0[3 * i + jj] += fields.disp[a][i] * grad_x_ref[a][jj];
                }
            }
        }
        let state = kinematics(&f).map_err(|_| ElementError::NonPositiveJacobian {
            elem,
            qp: q,
            det: det3(&f),
        })?;
        blocks.j_range.0 = blocks.j_range.0.min(state.j);
        blocks.j_range.1 = blocks.j_range.1.max(state.j);

        // implicit internal-variable update from the frozen step-n history
        let qp_state = &mut qp_states[q];
        qp_state.cbar_inv_np1 = state.cbar_inv;
        qp_state.j_np1 = state.j;
        if !taus.is_empty() && dt > 0.0 {
            update_internal(qp_state, &state.cbar_inv, &taus, dt, ga);
        }
        let a_list: Vec<Tensor2> = qp_state.branches.iter().map(|b| b.value_np1).collect();

        // fields at the point
        let mut p_qp = 0.0;
        for b in 0..N_P {
            p_qp += vals_p[b] * fields.pressure[b];
        }
        let mut h_ref = Vector3::ZERO;
        if soft {
            for a in 0..N_U {
                for d in 0..3 {
                    h_ref[d] -= fields.potential[a] * grad_x_ref[a][d];
                }
            }
        }

        let (j_hat, theta_hat) = pressure_constants(spec, qp_state.j_n)
            .map_err(|source| ElementError::Constitutive { elem, qp: q, source })?;

        let resp = assemble_point_response(
            spec, &state, &h_ref, b_applied, p_qp, &a_list, ga, dt,
        )
        .map_err(|source| ElementError::Constitutive { elem, qp: q, source })?;

        // spatial gradients
        let f_inv_t = inv3(&f)
            .map_err(|_| ElementError::NonPositiveJacobian {
                elem,
                qp: q,
                det: state.j,
            })?
            .transpose();
        let mut grad_x = [[0.0f64; 3]; N_U];
        for a in 0..N_U {
            grad_x[a] = f_inv_t.apply(&Vector3(grad_x_ref[a])).0;
        }

        let w_ref = quad.weight * det0;
        let w_cur = w_ref * state.j;

        // displacement block: K_uu(3a+i, 3b+k) += gx_a[j] e_ijkl gx_b[l]
        for b in 0..N_U {
            // h[(i,j)][k] = sum_l e[(i,j)][(k,l)] gx_b[l]
            let mut h = [[0.0f64; 3]; 9];
            for v in 0..9 {
                let row = &resp.e_mat.0[v];
                for k in 0..3 {
                    h[v][k] = row[vidx(k, 0)] * grad_x[b][0]
                        + row[vidx(k, 1)] * grad_x[b][1]
                        + row[vidx(k, 2)] * grad_x[b][2];
                }
            }
            for a in 0..N_U {
                let ga_ = &grad_x[a];
                for i in 0..3 {
                    let row = 3 * a + i;
                    for k in 0..3 {
                        let val = ga_[0] * h[vidx(i, 0)][k]
                            + ga_[1] * h[vidx(i, 1)][k]
                            + ga_[2] * h[vidx(i, 2)][k];
                        blocks.k_uu.add(row, 3 * b + k, val * w_cur);
                    }
                }
            }
        }

        // pressure coupling and constraint blocks
        for a in 0..N_U {
            for i in 0..3 {
                for b in 0..N_P {
                    blocks.k_up.add(3 * a + i, b, grad_x[a][i] * vals_p[b] * w_cur);
                }
            }
        }
        if theta_hat != 0.0 {
            for a in 0..N_P {
                for b in 0..N_P {
                    blocks
                        .k_pp
                        .add(a, b, -theta_hat * vals_p[a] * vals_p[b] * w_ref);
                }
            }
        }

        // residuals
        for a in 0..N_U {
            for i in 0..3 {
                let mut s = 0.0;
                for jj in 0..3 {
                    s += grad_x[a][jj] * resp.sigma_eff.get(i, jj);
                }
                blocks.r_u[3 * a + i] += s * w_cur;
            }
        }
        let constraint = state.j - j_hat - theta_hat * p_qp;
        for b in 0..N_P {
            blocks.r_p[b] += vals_p[b] * constraint * w_ref;
        }

        // potential blocks (coupled case)
        if soft {
            for a in 0..N_U {
                for b in 0..N_U {
                    let mut s = 0.0;
                    for i in 0..3 {
                        for jj in 0..3 {
                            s += grad_x[a][i] * resp.d_perm.get(i, jj) * grad_x[b][jj];
                        }
                    }
                    blocks.k_phiphi.add(a, b, s * w_cur);
                }
            }
            for a in 0..N_U {
                for i in 0..3 {
                    for b in 0..N_U {
                        let mut s = 0.0;
                        for jj in 0..3 {
                            for k in 0..3 {
                                s += grad_x[a][jj]
                                    * resp.coup_uphi.at(i, jj, k)
                                    * grad_x[b][k];
                            }
                        }
                        blocks.k_uphi.add(3 * a + i, b, s * w_cur);
                    }
                }
            }
            for a in 0..N_U {
                for b in 0..N_U {
                    for j in 0..3 {
                        let mut s = 0.0;
                        for i in 0..3 {
                            for k in 0..3 {
                                s += grad_x[a][i]
                                    * resp.coup_phiu.at(i, j, k)
                                    * grad_x[b][k];
                            }
                        }
                        blocks.k_phiu.add(a, 3 * b + j, s * w_cur);
                    }
                }
            }
            // spatial induction b = (1/J) F B
            let b_spatial = f.apply(&resp.b_ref) * (1.0 / state.j);
            for a in 0..N_U {
                let mut s = 0.0;
                for i in 0..3 {
                    s += grad_x[a][i] * b_spatial[i];
                }
                blocks.r_phi[a] += s * w_cur;
            }
        }
    }
    Ok(blocks)
}

/// Consistent load vector of a constant traction (force per reference area)
/// over one element face: entries `3a+i` of the element's u-dof vector.
pub fn face_traction_vector(
    mesh: &MixedMesh,
    elem: usize,
    face: u8,
    traction: Vector3,
) -> Result<[f64; U_DOFS], QuadratureError> {
    let mut out = [0.0; U_DOFS];
    for (vals, darea) in face_quadrature(mesh, elem, face)? {
        for a in 0..N_U {
            for i in 0..3 {
                out[3 * a + i] += vals[a] * traction[i] * darea;
            }
        }
    }
    Ok(out)
}

/// Consistent load vector of a constant scalar surface density over one
/// element face (potential dofs).
pub fn face_scalar_vector(
    mesh: &MixedMesh,
    elem: usize,
    face: u8,
    density: f64,
) -> Result<[f64; N_U], QuadratureError> {
    let mut out = [0.0; N_U];
    for (vals, darea) in face_quadrature(mesh, elem, face)? {
        for a in 0..N_U {
            out[a] += vals[a] * density * darea;
        }
    }
    Ok(out)
}

/// Reference area of one element face.
pub fn face_area(mesh: &MixedMesh, elem: usize, face: u8) -> Result<f64, QuadratureError> {
    Ok(face_quadrature(mesh, elem, face)?
        .iter()
        .map(|(_, da)| da)
        .sum())
}

/// Basis values and weighted reference area elements on a face.
fn face_quadrature(
    mesh: &MixedMesh,
    elem: usize,
    face: u8,
) -> Result<Vec<([f64; N_U], f64)>, QuadratureError> {
    let rule = gauss_rule_2d(3)?;
    let conn = &mesh.elems_u[elem];
    let mut out = Vec::with_capacity(rule.len());
    let (dir, _) = MixedMesh::face_param(face);
    let (ta, tb) = match dir {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    for ([a, b], w) in rule {
        let xi = MixedMesh::face_coord(face, a, b);
        let (vals, grads) = bq2_basis(xi);
        // surface tangents of the reference geometry map
        let mut t1 = Vector3::ZERO;
        let mut t2 = Vector3::ZERO;
        for n in 0..N_U {
            let x = mesh.nodes[conn[n]];
            t1 += x * grads[n][ta];
            t2 += x * grads[n][tb];
        }
        let cross = Vector3::new(
            t1[1] * t2[2] - t1[2] * t2[1],
            t1[2] * t2[0] - t1[0] * t2[2],
            t1[0] * t2[1] - t1[1] * t2[0],
        );
        out.push((vals, cross.norm() * w));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::HyperModel;
    use crate::fem::mesh::structured_hex_mesh;

    fn unit_cube() -> MixedMesh {
        structured_hex_mesh(Vector3::ZERO, [1.0, 1.0, 1.0], [1, 1, 1])
    }

    fn nh_spec() -> MaterialSpec {
        MaterialSpec {
            model: HyperModel::NeoHookean,
            mu: 100.0,
            incompressible: true,
            kappa: 0.0,
            branches: vec![],
            mu0: 1.0,
            magnetic: MagneticMode::None,
        }
    }

    fn zero_fields(mesh: &MixedMesh) -> ElementFields {
        let u = vec![0.0; 3 * mesh.n_nodes()];
        ElementFields::gather(mesh, 0, &u, |_| 0.0, &[])
    }

    #[test]
    fn undeformed_element_has_zero_residuals() {
        let mesh = unit_cube();
        let table = BasisTable::new(3).unwrap();
        let mut qps = vec![QuadPointState::initial(&[]); table.points.len()];
        let blocks = element_kernel(
            0,
            &zero_fields(&mesh),
            &nh_spec(),
            &table,
            &mut qps,
            &GAlphaParams::default(),
            0.0,
            &Vector3::ZERO,
        )
        .unwrap();
        assert!(blocks.r_u.iter().all(|v| v.abs() < 1e-12));
        assert!(blocks.r_p.iter().all(|v| v.abs() < 1e-12));
        assert!((blocks.j_range.0 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn incompressible_pressure_block_is_zero() {
        let mesh = unit_cube();
        let table = BasisTable::new(3).unwrap();
        let mut qps = vec![QuadPointState::initial(&[]); table.points.len()];
        let blocks = element_kernel(
            0,
            &zero_fields(&mesh),
            &nh_spec(),
            &table,
            &mut qps,
            &GAlphaParams::default(),
            0.0,
            &Vector3::ZERO,
        )
        .unwrap();
        assert!(blocks.k_pp.norm() == 0.0);
    }

    #[test]
    fn constant_pressure_residual_equals_surface_force() {
        // with u = 0 and p = p0: R_u(a,i) = p0 int dN_a/dx_i dv, which by the
        // divergence theorem equals the surface force of p0 n on the boundary
        let mesh = unit_cube();
        let table = BasisTable::new(3).unwrap();
        let mut qps = vec![QuadPointState::initial(&[]); table.points.len()];
        let p0 = 5.0;
        let u = vec![0.0; 3 * mesh.n_nodes()];
        let fields = ElementFields::gather(&mesh, 0, &u, |_| p0, &[]);
        let blocks = element_kernel(
            0,
            &fields,
            &nh_spec(),
            &table,
            &mut qps,
            &GAlphaParams::default(),
            0.0,
            &Vector3::ZERO,
        )
        .unwrap();
        // surface force from the six faces, outward normals
        let mut surf = [0.0f64; U_DOFS];
        for (face, normal) in [
            (0u8, Vector3::new(-1.0, 0.0, 0.0)),
            (1, Vector3::new(1.0, 0.0, 0.0)),
            (2, Vector3::new(0.0, -1.0, 0.0)),
            (3, Vector3::new(0.0, 1.0, 0.0)),
            (4, Vector3::new(0.0, 0.0, -1.0)),
            (5, Vector3::new(0.0, 0.0, 1.0)),
        ] {
            let v = face_traction_vector(&mesh, 0, face, normal * p0).unwrap();
            for (s, x) in surf.iter_mut().zip(v) {
                *s += x;
            }
        }
        for (a, b) in blocks.r_u.iter().zip(surf) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        // row sums of K_up against rigid translation vanish
        for b in 0..N_P {
            for i in 0..3 {
                let mut s = 0.0;
                for a in 0..N_U {
                    s += blocks.k_up.get(3 * a + i, b);
                }
                assert!(s.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stiffness_is_symmetric_and_coupling_transposes() {
        let mesh = unit_cube();
        let table = BasisTable::new(3).unwrap();
        let mut spec = nh_spec();
        spec.magnetic = MagneticMode::soft_default();
        let mut qps = vec![QuadPointState::initial(&[]); table.points.len()];
        // a non-trivial but admissible state
        let mut u = vec![0.0; 3 * mesh.n_nodes()];
        let mut phi = vec![0.0; mesh.n_nodes()];
        for (n, x) in mesh.nodes.iter().enumerate() {
            u[3 * n] = 0.08 * x[1] + 0.03 * x[2];
            u[3 * n + 1] = -0.04 * x[0];
            u[3 * n + 2] = 0.05 * x[0] * 0.5;
            phi[n] = 0.4 * x[2] + 0.1 * x[0];
        }
        let fields = ElementFields::gather(&mesh, 0, &u, |_| 1.5, &phi);
        let blocks = element_kernel(
            0,
            &fields,
            &spec,
            &table,
            &mut qps,
            &GAlphaParams::default(),
            0.0,
            &Vector3::ZERO,
        )
        .unwrap();
        assert!(blocks.k_uu.max_abs_asymmetry() <= 1e-9 * blocks.k_uu.norm());
        assert!(blocks.k_phiphi.max_abs_asymmetry() <= 1e-10 * blocks.k_phiphi.norm());
        // K_uphi = K_phiu^t within round-off
        let mut worst = 0.0f64;
        for r in 0..U_DOFS {
            for c in 0..N_U {
                worst = worst.max((blocks.k_uphi.get(r, c) - blocks.k_phiu.get(c, r)).abs());
            }
        }
        assert!(worst <= 1e-10 * blocks.k_uphi.norm().max(1e-12));
    }

    #[test]
    fn rigid_translation_leaves_residual_unchanged() {
        let mesh = unit_cube();
        let table = BasisTable::new(3).unwrap();
        let mut qps = vec![QuadPointState::initial(&[]); table.points.len()];
        let mut u = vec![0.0; 3 * mesh.n_nodes()];
        for (n, x) in mesh.nodes.iter().enumerate() {
            u[3 * n] = 0.1 * x[1];
            u[3 * n + 1] = 0.02 * x[0];
            u[3 * n + 2] = 0.0;
        }
        let fields = ElementFields::gather(&mesh, 0, &u, |_| 0.7, &[]);
        let r1 = element_kernel(
            0,
            &fields,
            &nh_spec(),
            &table,
            &mut qps,
            &GAlphaParams::default(),
            0.0,
            &Vector3::ZERO,
        )
        .unwrap()
        .r_u;
        for v in u.iter_mut().skip(0).step_by(3) {
            *v += 42.0;
        }
        for v in u.iter_mut().skip(1).step_by(3) {
            *v -= 17.0;
        }
        let fields2 = ElementFields::gather(&mesh, 0, &u, |_| 0.7, &[]);
        let r2 = element_kernel(
            0,
            &fields2,
            &nh_spec(),
            &table,
            &mut qps,
            &GAlphaParams::default(),
            0.0,
            &Vector3::ZERO,
        )
        .unwrap()
        .r_u;
        for (a, b) in r1.iter().zip(r2) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn inverted_element_is_reported() {
        let mesh = unit_cube();
        let table = BasisTable::new(3).unwrap();
        let mut qps = vec![QuadPointState::initial(&[]); table.points.len()];
        let mut u = vec![0.0; 3 * mesh.n_nodes()];
        for (n, x) in mesh.nodes.iter().enumerate() {
            u[3 * n] = -1.5 * x[0]; // folds the element over
        }
        let fields = ElementFields::gather(&mesh, 0, &u, |_| 0.0, &[]);
        let err = element_kernel(
            0,
            &fields,
            &nh_spec(),
            &table,
            &mut qps,
            &GAlphaParams::default(),
            0.0,
            &Vector3::ZERO,
        )
        .unwrap_err();
        assert!(matches!(err, ElementError::NonPositiveJacobian { .. }));
    }

    #[test]
    fn face_areas_of_unit_cube() {
        let mesh = unit_cube();
        for face in 0..6u8 {
            assert!((face_area(&mesh, 0, face).unwrap() - 1.0).abs() < 1e-13);
        }
        let v = face_scalar_vector(&mesh, 0, 5, 3.0).unwrap();
        assert!((v.iter().sum::<f64>() - 3.0).abs() < 1e-12);
    }
}
