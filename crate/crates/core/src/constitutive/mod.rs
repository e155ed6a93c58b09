//! Strain-energy contributions and their exact first and second derivatives.
//!
//! Every term of the total energy density (distortional hyperelastic,
//! Maxwell-branch viscoelastic, hard/soft magnetic, free space) is evaluated
//! here together with the spatial quantities the element kernels consume:
//! the effective Cauchy stress, the 9x9 spatial tangent, the referential
//! induction, the two third-order magneto-mechanical coupling blocks, and the
//! spatial permeability-like tensor. The companion [`fd`] module provides the
//! central-difference oracle used to verify all of them.
//!
//! Flattening convention for gradients-as-9-vectors: entry `(i, j)` (component
//! `i`, spatial derivative direction `j`) sits at `3*j + i`, i.e. the vector
//! reads `[u1,x u2,x u3,x u1,y ... u3,z]`. [`Tangent9`], [`CouplingUPhi`] and
//! [`CouplingPhiU`] all use this layout.

pub mod fd;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{det3, inv3, DeformationState, Tensor2, Vector3};
use crate::visco::{visco_stress_tangent, GAlphaParams};

/// Default free-space permeability in g.mm/(s^2 A^2) for the g-mm-s-A-mT
/// unit system.
pub const MU0_DEFAULT: f64 = 1.2566;

/// Fraction of the Gent limit at which evaluation refuses to continue.
pub const GENT_GUARD_FRACTION: f64 = 0.999;

#[derive(Debug, Error, PartialEq)]
pub enum ConstitutiveError {
    #[error("Gent locking limit reached: i1bar - 3 = {excess:.6} >= {limit:.6}")]
    GentLockingLimit { excess: f64, limit: f64 },
    #[error("volumetric energy has zero curvature at J = {j_n}")]
    ZeroCurvature { j_n: f64 },
    #[error("invalid material parameter: {0}")]
    InvalidParameter(String),
}

/// Flat index of gradient component `(i, j)` in a 9-vector.
#[inline]
pub const fn vidx(i: usize, j: usize) -> usize {
    3 * j + i
}

/// Fourth-order spatial tangent stored as a 9x9 matrix in the [`vidx`]
/// layout: entry `(vidx(i,j), vidx(k,l))` is `e_ijkl`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tangent9(pub [[f64; 9]; 9]);

impl Tangent9 {
    pub const ZERO: Tangent9 = Tangent9([[0.0; 9]; 9]);

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.0[vidx(i, j)][vidx(k, l)]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize, k: usize, l: usize) -> &mut f64 {
        &mut self.0[vidx(i, j)][vidx(k, l)]
    }

    pub fn add_assign(&mut self, other: &Tangent9) {
        for r in 0..9 {
            for c in 0..9 {
                self.0[r][c] += other.0[r][c];
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_diff(&self, other: &Tangent9) -> f64 {
        let mut m = 0.0f64;
        for r in 0..9 {
            for c in 0..9 {
                m = m.max((self.0[r][c] - other.0[r][c]).abs());
            }
        }
        m
    }
}

/// Third-order coupling block mapping potential gradients to stress
/// increments; entry `[vidx(i,j)][k]` is `p_ijk`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingUPhi(pub [[f64; 3]; 9]);

impl CouplingUPhi {
    pub const ZERO: CouplingUPhi = CouplingUPhi([[0.0; 3]; 9]);

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.0[vidx(i, j)][k]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize, k: usize) -> &mut f64 {
        &mut self.0[vidx(i, j)][k]
    }

    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_diff(&self, other: &CouplingUPhi) -> f64 {
        let mut m = 0.0f64;
        for r in 0..9 {
            for c in 0..3 {
                m = m.max((self.0[r][c] - other.0[r][c]).abs());
            }
        }
        m
    }
}

/// Third-order coupling block mapping displacement gradients to induction
/// increments; entry `[i][vidx(j,k)]` is `p_hat_ijk`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingPhiU(pub [[f64; 9]; 3]);

impl CouplingPhiU {
    pub const ZERO: CouplingPhiU = CouplingPhiU([[0.0; 9]; 3]);

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.0[i][vidx(j, k)]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize, k: usize) -> &mut f64 {
        &mut self.0[i][vidx(j, k)]
    }

    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_diff(&self, other: &CouplingPhiU) -> f64 {
        let mut m = 0.0f64;
        for r in 0..3 {
            for c in 0..9 {
                m = m.max((self.0[r][c] - other.0[r][c]).abs());
            }
        }
        m
    }
}

/// Distortional hyperelastic model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum HyperModel {
    NeoHookean,
    Gent { i_m: f64 },
}

/// One Maxwell branch: viscous shear modulus and relaxation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxwellBranch {
    pub mu_v: f64,
    pub tau: f64,
}

/// Magnetic behaviour of the material point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum MagneticMode {
    /// Purely mechanical.
    None,
    /// Permanently magnetised filler: energy `-(1/mu0) Ba . F Br` driven by a
    /// prescribed residual field `b_r` and the applied field of the load
    /// program. The associated tangent vanishes identically.
    Hard { b_r: Vector3 },
    /// Magnetisable filler: free-space energy plus an invariant-based
    /// coupling with weights `alpha`, `beta`, `eta` on `I`, `cbar`,
    /// `cbar_inv` contracted with `H (x) H`.
    Soft {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default = "default_eta")]
        eta: f64,
    },
}

fn default_alpha() -> f64 {
    -0.5
}
fn default_beta() -> f64 {
    -4.0
}
fn default_eta() -> f64 {
    -0.5
}

impl MagneticMode {
    pub fn soft_default() -> Self {
        MagneticMode::Soft {
            alpha: default_alpha(),
            beta: default_beta(),
            eta: default_eta(),
        }
    }
}

/// Complete material description of one mesh region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialSpec {
    pub model: HyperModel,
    /// Shear modulus (Pa in the g-mm-s unit system).
    pub mu: f64,
    /// Enforce J = 1 exactly through the pressure field.
    #[serde(default)]
    pub incompressible: bool,
    /// Bulk modulus; only read on the compressible path.
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub branches: Vec<MaxwellBranch>,
    #[serde(default = "default_mu0")]
    pub mu0: f64,
    #[serde(default = "default_magnetic")]
    pub magnetic: MagneticMode,
}

fn default_mu0() -> f64 {
    MU0_DEFAULT
}
fn default_magnetic() -> MagneticMode {
    MagneticMode::None
}

impl MaterialSpec {
    pub fn validate(&self) -> Result<(), ConstitutiveError> {
        let bad = |m: String| Err(ConstitutiveError::InvalidParameter(m));
        if !(self.mu > 0.0) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if let HyperModel::Gent { i_m } = self.model {
            if !(i_m > 0.0) {
                return bad(format!("Gent parameter must be positive, got {i_m}"));
            }
        }
        if !self.incompressible && !(self.kappa > 0.0) {
            return bad(format!(
                "compressible material needs kappa > 0, got {}",
                self.kappa
            ));
        }
        for (k, b) in self.branches.iter().enumerate() {
            if b.mu_v < 0.0 || !(b.tau > 0.0) {
                return bad(format!(
                    "branch {k}: need mu_v >= 0 and tau > 0, got ({}, {})",
                    b.mu_v, b.tau
                ));
            }
        }
        if !(self.mu0 > 0.0) {
            return bad(format!("mu0 must be positive, got {}", self.mu0));
        }
        Ok(())
    }

    pub fn taus(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.tau).collect()
    }
}

/// Distortional stress and tangent of the chosen hyperelastic model.
#[derive(Debug, Clone)]
pub struct DevResponse {
    pub energy: f64,
    /// First Piola-Kirchhoff stress of this term.
    pub p: Tensor2,
    /// Cauchy stress of this term.
    pub sigma: Tensor2,
    /// Spatial tangent of this term.
    pub e: Tangent9,
}

/// Evaluates the distortional energy, stress and tangent.
///
/// Both models share the isochoric kernel; Gent scales it by the
/// strain-stiffening factor `g = 1/(1 - (i1bar-3)/i_m)` and adds a rank-one
/// term from the second energy derivative. Evaluation refuses to continue at
/// `i1bar - 3 >= 0.999 i_m` so the logarithm stays well conditioned.
pub fn eval_deviatoric(
    spec: &MaterialSpec,
    state: &DeformationState,
) -> Result<DevResponse, ConstitutiveError> {
    let excess = state.i1bar - 3.0;
    match spec.model {
        HyperModel::NeoHookean => {
            let (sigma, e) =
                visco_stress_tangent(&state.f, &Tensor2::IDENTITY, spec.mu, 0.0, state.j);
            let p = first_pk_from_cauchy(&sigma, &state.f, state.j);
            Ok(DevResponse {
                energy: 0.5 * spec.mu * excess,
                p,
                sigma,
                e,
            })
        }
        HyperModel::Gent { i_m } => {
            let limit = GENT_GUARD_FRACTION * i_m;
            if excess >= limit {
                return Err(ConstitutiveError::GentLockingLimit { excess, limit });
            }
            let g = 1.0 / (1.0 - excess / i_m);
            let (sigma, mut e) =
                visco_stress_tangent(&state.f, &Tensor2::IDENTITY, spec.mu * g, 0.0, state.j);
            // second-derivative contribution: (2 mu g^2 / (i_m J)) dev(bbar) (x) dev(bbar)
            let devb = state.bbar().dev();
            let c2 = 2.0 * spec.mu * g * g / (i_m * state.j);
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        for l in 0..3 {
                            *e.at_mut(i, j, k, l) += c2 * devb.get(i, j) * devb.get(k, l);
                        }
                    }
                }
            }
            let p = first_pk_from_cauchy(&sigma, &state.f, state.j);
            Ok(DevResponse {
                energy: -0.5 * spec.mu * i_m * (1.0 - excess / i_m).ln(),
                p,
                sigma,
                e,
            })
        }
    }
}

/// Volumetric energy `(kappa/2)(J-1)^2` and its first two J-derivatives.
///
/// Never consulted on the truly incompressible path.
pub fn eval_volumetric(spec: &MaterialSpec, j: f64) -> (f64, f64, f64) {
    debug_assert!(j > 0.0);
    let d = j - 1.0;
    (0.5 * spec.kappa * d * d, spec.kappa * d, spec.kappa)
}

/// Constants of the linearised pressure energy, frozen at the previously
/// converged step: incompressible -> `(1, 0)`; otherwise
/// `J_hat = J_n - psi'/psi''` and `theta_hat = 1/psi''`, both at `J_n`.
pub fn pressure_constants(
    spec: &MaterialSpec,
    j_n: f64,
) -> Result<(f64, f64), ConstitutiveError> {
    if spec.incompressible {
        return Ok((1.0, 0.0));
    }
    let (_, dpsi, d2psi) = eval_volumetric(spec, j_n);
    if d2psi == 0.0 {
        return Err(ConstitutiveError::ZeroCurvature { j_n });
    }
    Ok((j_n - dpsi / d2psi, 1.0 / d2psi))
}

/// Hard-magnetic energy `-(1/mu0) Ba . F Br` and its stress
/// `P_iJ = -(1/mu0) Ba_i Br_J`. The spatial tangent of this term is
/// identically zero (the stress is constant in F).
pub fn eval_hard_magnetic(
    spec: &MaterialSpec,
    f: &Tensor2,
    b_applied: &Vector3,
) -> (f64, Tensor2) {
    let b_r = match spec.magnetic {
        MagneticMode::Hard { b_r } => b_r,
        _ => return (0.0, Tensor2::ZERO),
    };
    let energy = -b_applied.dot(&f.apply(&b_r)) / spec.mu0;
    let p = b_applied.outer(&b_r) * (-1.0 / spec.mu0);
    (energy, p)
}

/// Magnetic response of the soft (coupled) model.
#[derive(Debug, Clone)]
pub struct SoftResponse {
    pub energy: f64,
    pub p: Tensor2,
    pub sigma: Tensor2,
    /// Referential induction `B = -dPsi/dH`.
    pub b_ref: Vector3,
    pub e: Tangent9,
    pub coup_uphi: CouplingUPhi,
    pub coup_phiu: CouplingPhiU,
    /// Spatial second derivative in H (3x3, enters the potential block).
    pub perm: Tensor2,
}

/// Evaluates the free-space term plus the three coupling invariants for a
/// soft-magnetic point. All outputs are exact analytic derivatives of the
/// energy in `(F, H)`, expressed in spatial form.
pub fn eval_soft_magnetic(
    spec: &MaterialSpec,
    state: &DeformationState,
    h_ref: &Vector3,
) -> SoftResponse {
    let (alpha, beta, eta) = match spec.magnetic {
        MagneticMode::Soft { alpha, beta, eta } => (alpha, beta, eta),
        _ => {
            return SoftResponse {
                energy: 0.0,
                p: Tensor2::ZERO,
                sigma: Tensor2::ZERO,
                b_ref: Vector3::ZERO,
                e: Tangent9::ZERO,
                coup_uphi: CouplingUPhi::ZERO,
                coup_phiu: CouplingPhiU::ZERO,
                perm: Tensor2::ZERO,
            }
        }
    };
    let mu0 = spec.mu0;
    let f = &state.f;
    let j = state.j;
    let ft = f.transpose();
    let f_inv = inv3(f).expect("state carries det(F) > 0");
    let c_inv = f_inv * f_inv.transpose();
    let b_left = *f * ft;

    // spatial field h = F^-t H, convected field y = F H
    let hs = f_inv.transpose().apply(h_ref);
    let ys = f.apply(h_ref);
    let s = hs.dot(&hs); // H . C^-1 H
    let t = ys.dot(&ys); // H . C H
    let w = c_inv.apply(h_ref);
    let by = b_left.apply(&ys);
    let jm23 = j.powf(-2.0 / 3.0);
    let jp23 = j.powf(2.0 / 3.0);
    let jm13 = j.powf(-1.0 / 3.0);

    let kd = |a: usize, b: usize| -> f64 { (a == b) as u8 as f64 };

    // --- energies -----------------------------------------------------
    let e_free = -0.5 * mu0 * j * s;
    let e_alpha = mu0 * alpha * h_ref.dot(h_ref);
    let e_beta = mu0 * beta * jm23 * t;
    let e_eta = mu0 * eta * jp23 * s;

    // --- referential induction B = -dPsi/dH ---------------------------
    let b_ref = w * (mu0 * j)
        + *h_ref * (-2.0 * mu0 * alpha)
        + ft.apply(&ys) * (-2.0 * mu0 * beta * jm23)
        + w * (-2.0 * mu0 * eta * jp23);

    // --- Cauchy stresses ----------------------------------------------
    // free space: Maxwell stress; beta/eta terms are distortional.
    let mut sigma = hs.outer(&hs) * mu0;
    let half_s = 0.5 * mu0 * s;
    sigma.0[0] -= half_s;
    sigma.0[4] -= half_s;
    sigma.0[8] -= half_s;

    let (sigma_beta, e_beta_t) =
        visco_stress_tangent(f, &h_ref.outer(h_ref), 2.0 * mu0 * beta, 0.0, j);
    sigma += sigma_beta;

    let ceta = mu0 * eta * jm13;
    let mut sigma_eta = hs.outer(&hs) * (-2.0 * ceta);
    let two_thirds_s = 2.0 / 3.0 * ceta * s;
    sigma_eta.0[0] += two_thirds_s;
    sigma_eta.0[4] += two_thirds_s;
    sigma_eta.0[8] += two_thirds_s;
    sigma += sigma_eta;

    // --- spatial tangent -----------------------------------------------
    let mut e = e_beta_t;
    for i in 0..3 {
        for jj in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let free = mu0
                        * (-0.5 * s * kd(i, jj) * kd(k, l)
                            + hs[k] * hs[l] * kd(i, jj)
                            + 0.5 * s * kd(i, l) * kd(jj, k)
                            + hs[i] * hs[jj] * kd(k, l)
                            - hs[jj] * hs[k] * kd(i, l)
                            - hs[i] * hs[k] * kd(jj, l)
                            - hs[i] * hs[l] * kd(jj, k));
                    let etat = ceta
                        * (4.0 / 9.0 * s * kd(i, jj) * kd(k, l)
                            - 4.0 / 3.0 * (hs[i] * hs[jj] * kd(k, l) + hs[k] * hs[l] * kd(i, jj))
                            - 2.0 / 3.0 * s * kd(i, l) * kd(jj, k)
                            + 2.0
                                * (kd(i, l) * hs[jj] * hs[k]
                                    + kd(jj, l) * hs[i] * hs[k]
                                    + kd(jj, k) * hs[i] * hs[l]));
                    *e.at_mut(i, jj, k, l) += free + etat;
                }
            }
        }
    }

    // --- coupling blocks -------------------------------------------------
    let cb = 2.0 * mu0 * beta * jm23 / j;
    let che = 2.0 * mu0 * eta * jm13;
    let mut coup_uphi = CouplingUPhi::ZERO;
    let mut coup_phiu = CouplingPhiU::ZERO;
    for i in 0..3 {
        for jj in 0..3 {
            for k in 0..3 {
                let free =
                    mu0 * (hs[k] * kd(i, jj) - kd(i, k) * hs[jj] - hs[i] * kd(jj, k));
                let beta_t = -cb
                    * (b_left.get(i, k) * ys[jj] + ys[i] * b_left.get(jj, k)
                        - 2.0 / 3.0 * kd(i, jj) * by[k]);
                let eta_t =
                    -che * (2.0 / 3.0 * hs[k] * kd(i, jj) - kd(i, k) * hs[jj] - hs[i] * kd(jj, k));
                *coup_uphi.at_mut(i, jj, k) = free + beta_t + eta_t;

                let free_h =
                    mu0 * (kd(jj, k) * hs[i] - kd(i, k) * hs[jj] - kd(i, jj) * hs[k]);
                let beta_h = -cb
                    * (-2.0 / 3.0 * kd(jj, k) * by[i]
                        + b_left.get(i, k) * ys[jj]
                        + b_left.get(i, jj) * ys[k]);
                let eta_h =
                    -che * (2.0 / 3.0 * kd(jj, k) * hs[i] - kd(i, k) * hs[jj] - kd(i, jj) * hs[k]);
                *coup_phiu.at_mut(i, jj, k) = free_h + beta_h + eta_h;
            }
        }
    }

    // --- spatial permeability-like block ---------------------------------
    let mut perm = Tensor2::ZERO;
    for i in 0..3 {
        for jj in 0..3 {
            let b2 = (b_left * b_left).get(i, jj);
            perm.set(
                i,
                jj,
                -mu0 * kd(i, jj)
                    + 2.0 * mu0 * alpha / j * b_left.get(i, jj)
                    + 2.0 * mu0 * beta / j * jm23 * b2
                    + 2.0 * mu0 * eta * jm13 * kd(i, jj),
            );
        }
    }

    let sigma_total = sigma;
    let p = first_pk_from_cauchy(&sigma_total, f, j);
    SoftResponse {
        energy: e_free + e_alpha + e_beta + e_eta,
        p,
        sigma: sigma_total,
        b_ref,
        e,
        coup_uphi,
        coup_phiu,
        perm,
    }
}

/// Recovers the first Piola-Kirchhoff stress from a Cauchy stress that was
/// built as its push-forward: `P = J sigma F^-t`.
pub fn first_pk_from_cauchy(sigma: &Tensor2, f: &Tensor2, j: f64) -> Tensor2 {
    let f_inv_t = inv3(f).expect("det(F) > 0").transpose();
    *sigma * f_inv_t * j
}

/// Complete point response consumed by the element kernels.
#[derive(Debug, Clone)]
pub struct StressTangent {
    /// Total material energy density (pressure term excluded).
    pub energy: f64,
    /// Total constitutive first Piola-Kirchhoff stress (pressure excluded).
    pub p: Tensor2,
    /// Effective Cauchy stress including the pressure contribution.
    pub sigma_eff: Tensor2,
    /// Spatial tangent including the pressure geometric term.
    pub e_mat: Tangent9,
    /// Referential induction (soft mode; zero otherwise).
    pub b_ref: Vector3,
    pub coup_uphi: CouplingUPhi,
    pub coup_phiu: CouplingPhiU,
    pub d_perm: Tensor2,
}

/// Sums every active energy contribution of a material point into one
/// [`StressTangent`]. The internal variables in `a_list` must already hold
/// the current iterates (fully implicit update happens in the element loop);
/// the algorithmic relaxation factor enters the tangent per branch.
#[allow(clippy::too_many_arguments)]
pub fn assemble_point_response(
    spec: &MaterialSpec,
    state: &DeformationState,
    h_ref: &Vector3,
    b_applied: &Vector3,
    pressure: f64,
    a_list: &[Tensor2],
    ga: &GAlphaParams,
    dt: f64,
) -> Result<StressTangent, ConstitutiveError> {
    debug_assert_eq!(a_list.len(), spec.branches.len());
    let dev = eval_deviatoric(spec, state)?;
    let mut energy = dev.energy;
    let mut sigma = dev.sigma;
    let mut p_total = dev.p;
    let mut e = dev.e;

    for (branch, a) in spec.branches.iter().zip(a_list) {
        // dt = 0 means a pure equilibrium evaluation: keep the branch stress
        // but drop the algorithmic relaxation term.
        let lam = if dt > 0.0 {
            ga.alpha_f * ga.lambda(dt, branch.tau)
        } else {
            0.0
        };
        let (sv, ev) = visco_stress_tangent(&state.f, a, branch.mu_v, lam, state.j);
        sigma += sv;
        e.add_assign(&ev);
        p_total += first_pk_from_cauchy(&sv, &state.f, state.j);
        let det_a = det3(a);
        energy +=
            0.5 * branch.mu_v * (a.double_dot(&state.cbar) - 3.0 - det_a.ln());
    }

    let mut b_ref = Vector3::ZERO;
    let mut coup_uphi = CouplingUPhi::ZERO;
    let mut coup_phiu = CouplingPhiU::ZERO;
    let mut d_perm = Tensor2::ZERO;
    match spec.magnetic {
        MagneticMode::None => {}
        MagneticMode::Hard { .. } => {
            let (em, pm) = eval_hard_magnetic(spec, &state.f, b_applied);
            energy += em;
            p_total += pm;
            // sigma_magn = (1/J) P_magn F^t; tangent contribution is zero.
            sigma += pm * state.f.transpose() * (1.0 / state.j);
        }
        MagneticMode::Soft { .. } => {
            let soft = eval_soft_magnetic(spec, state, h_ref);
            energy += soft.energy;
            sigma += soft.sigma;
            p_total += soft.p;
            e.add_assign(&soft.e);
            b_ref = soft.b_ref;
            coup_uphi = soft.coup_uphi;
            coup_phiu = soft.coup_phiu;
            d_perm = soft.perm;
        }
    }

    // pressure: sigma += p I, plus the geometric term p (d_ij d_kl - d_il d_jk)
    sigma.0[0] += pressure;
    sigma.0[4] += pressure;
    sigma.0[8] += pressure;
    if pressure != 0.0 {
        let kd = |a: usize, b: usize| -> f64 { (a == b) as u8 as f64 };
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        *e.at_mut(i, j, k, l) +=
                            pressure * (kd(i, j) * kd(k, l) - kd(i, l) * kd(j, k));
                    }
                }
            }
        }
    }

    Ok(StressTangent {
        energy,
        p: p_total,
        sigma_eff: sigma,
        e_mat: e,
        b_ref,
        coup_uphi,
        coup_phiu,
        d_perm,
    })
}
