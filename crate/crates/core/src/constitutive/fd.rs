//! Central-difference verification oracle for the analytic tangents.
//!
//! The oracle differences the full constitutive pipeline — kinematics,
//! implicit internal-variable update from frozen step-n history, stress and
//! induction evaluation — in the referential variables `(F, H)` and pushes
//! the result forward with the unperturbed deformation gradient. It stays
//! deliberately independent of the analytic tangent code paths it checks.

use crate::constitutive::{
    eval_deviatoric, eval_hard_magnetic, eval_soft_magnetic, first_pk_from_cauchy,
    ConstitutiveError, CouplingPhiU, CouplingUPhi, MagneticMode, MaterialSpec, Tangent9,
};
use crate::tensor::{kinematics, Tensor2, Vector3};
use crate::visco::{update_branch, visco_stress_tangent, GAlphaParams, QuadPointState};

/// All difference-quotient tangents at one state.
#[derive(Debug, Clone)]
pub struct FdTangents {
    pub e_mat: Tangent9,
    pub coup_uphi: CouplingUPhi,
    pub coup_phiu: CouplingPhiU,
    pub d_perm: Tensor2,
}

/// Total constitutive first Piola-Kirchhoff stress and referential induction
/// at `(F, H)`, with internal variables updated implicitly from the frozen
/// history in `qp`.
#[allow(clippy::too_many_arguments)]
fn pipeline(
    spec: &MaterialSpec,
    f: &Tensor2,
    h_ref: &Vector3,
    b_applied: &Vector3,
    qp: &QuadPointState,
    ga: &GAlphaParams,
    dt: f64,
) -> Result<(Tensor2, Vector3), ConstitutiveError> {
    let state = kinematics(f).map_err(|_| {
        ConstitutiveError::InvalidParameter("perturbed F lost positivity".into())
    })?;
    let dev = eval_deviatoric(spec, &state)?;
    let mut p = dev.p;

    for (branch, bs) in spec.branches.iter().zip(&qp.branches) {
        let (a_np1, _) = if dt > 0.0 {
            update_branch(
                &bs.value_n,
                &bs.rate_n,
                &qp.cbar_inv_n,
                &state.cbar_inv,
                branch.tau,
                dt,
                ga,
            )
        } else {
            (bs.value_n, bs.rate_n)
        };
        let (sv, _) = visco_stress_tangent(&state.f, &a_np1, branch.mu_v, 0.0, state.j);
        p += first_pk_from_cauchy(&sv, &state.f, state.j);
    }

    let mut b_ref = Vector3::ZERO;
    match spec.magnetic {
        MagneticMode::None => {}
        MagneticMode::Hard { .. } => {
            let (_, pm) = eval_hard_magnetic(spec, &state.f, b_applied);
            p += pm;
        }
        MagneticMode::Soft { .. } => {
            let soft = eval_soft_magnetic(spec, &state, h_ref);
            p += soft.p;
            b_ref = soft.b_ref;
        }
    }
    Ok((p, b_ref))
}

/// Central-difference approximation of every tangent block at `(F, H)`.
///
/// Steps are `1e-6 (1 + ||F||)` in F and `1e-6 (1 + ||H||)` in H. The
/// derivatives are taken in the reference variables and wrapped with the
/// base-state push-forwards, matching the definitions of the spatial blocks.
#[allow(clippy::too_many_arguments)]
pub fn fd_tangent_oracle(
    spec: &MaterialSpec,
    f: &Tensor2,
    h_ref: &Vector3,
    b_applied: &Vector3,
    qp: &QuadPointState,
    ga: &GAlphaParams,
    dt: f64,
) -> Result<FdTangents, ConstitutiveError> {
    let state = kinematics(f).map_err(|_| {
        ConstitutiveError::InvalidParameter("base F must have det > 0".into())
    })?;
    let j = state.j;
    let hf = 1e-6 * (1.0 + f.norm());
    let hh = 1e-6 * (1.0 + h_ref.norm());

    // dP/dF[(i,J)][(k,L)] and dB/dF[I][(k,L)]
    let mut dp_df = [[0.0f64; 9]; 9];
    let mut db_df = [[0.0f64; 9]; 3];
    for k in 0..3 {
        for cap_l in 0..3 {
            let mut fp = *f;
            let mut fm = *f;
            fp.0[3 * k + cap_l] += hf;
            fm.0[3 * k + cap_l] -= hf;
            let (pp, bp) = pipeline(spec, &fp, h_ref, b_applied, qp, ga, dt)?;
            let (pm, bm) = pipeline(spec, &fm, h_ref, b_applied, qp, ga, dt)?;
            for i in 0..3 {
                for cap_j in 0..3 {
                    dp_df[3 * i + cap_j][3 * k + cap_l] =
                        (pp.get(i, cap_j) - pm.get(i, cap_j)) / (2.0 * hf);
                }
            }
            for cap_i in 0..3 {
                db_df[cap_i][3 * k + cap_l] = (bp[cap_i] - bm[cap_i]) / (2.0 * hf);
            }
        }
    }

    // dP/dH[(i,J)][K] and dB/dH[I][K]
    let mut dp_dh = [[0.0f64; 3]; 9];
    let mut db_dh = [[0.0f64; 3]; 3];
    for cap_k in 0..3 {
        let mut hp = *h_ref;
        let mut hm = *h_ref;
        hp[cap_k] += hh;
        hm[cap_k] -= hh;
        let (pp, bp) = pipeline(spec, f, &hp, b_applied, qp, ga, dt)?;
        let (pm, bm) = pipeline(spec, f, &hm, b_applied, qp, ga, dt)?;
        for i in 0..3 {
            for cap_j in 0..3 {
                dp_dh[3 * i + cap_j][cap_k] =
                    (pp.get(i, cap_j) - pm.get(i, cap_j)) / (2.0 * hh);
            }
        }
        for cap_i in 0..3 {
            db_dh[cap_i][cap_k] = (bp[cap_i] - bm[cap_i]) / (2.0 * hh);
        }
    }

    // push forward with the base deformation gradient
    let mut e_mat = Tangent9::ZERO;
    let mut coup_uphi = CouplingUPhi::ZERO;
    let mut coup_phiu = CouplingPhiU::ZERO;
    let mut d_perm = Tensor2::ZERO;
    for i in 0..3 {
        for jj in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let mut acc = 0.0;
                    for cap_j in 0..3 {
                        for cap_l in 0..3 {
                            acc += f.get(jj, cap_j)
                                * dp_df[3 * i + cap_j][3 * k + cap_l]
                                * f.get(l, cap_l);
                        }
                    }
                    *e_mat.at_mut(i, jj, k, l) = acc / j;
                }
            }
        }
    }
    for i in 0..3 {
        for jj in 0..3 {
            for k in 0..3 {
                // p_ijk = -(1/J) F_jJ dP_iJ/dH_K F_kK
                let mut acc = 0.0;
                for cap_j in 0..3 {
                    for cap_k in 0..3 {
                        acc += f.get(jj, cap_j) * dp_dh[3 * i + cap_j][cap_k] * f.get(k, cap_k);
                    }
                }
                *coup_uphi.at_mut(i, jj, k) = -acc / j;

                // p_hat_ijk = (1/J) F_iI dB_I/dF_jK F_kK
                let mut acc2 = 0.0;
                for cap_i in 0..3 {
                    for cap_k in 0..3 {
                        acc2 +=
                            f.get(i, cap_i) * db_df[cap_i][3 * jj + cap_k] * f.get(k, cap_k);
                    }
                }
                *coup_phiu.at_mut(i, jj, k) = acc2 / j;
            }
        }
    }
    for i in 0..3 {
        for jj in 0..3 {
            // d_ij = -(1/J) F_iI dB_I/dH_J F_jJ
            let mut acc = 0.0;
            for cap_i in 0..3 {
                for cap_j in 0..3 {
                    acc += f.get(i, cap_i) * db_dh[cap_i][cap_j] * f.get(jj, cap_j);
                }
            }
            d_perm.set(i, jj, -acc / j);
        }
    }

    Ok(FdTangents {
        e_mat,
        coup_uphi,
        coup_phiu,
        d_perm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{assemble_point_response, HyperModel, MaxwellBranch, MU0_DEFAULT};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_state(rng: &mut ChaCha8Rng) -> (Tensor2, Vector3) {
        let mut f = Tensor2::IDENTITY;
        for i in 0..9 {
            f.0[i] += rng.gen_range(-0.25..0.25);
        }
        let h = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        (f, h)
    }

    fn check_mode(spec: &MaterialSpec, with_branch: bool, seed: u64) {
        let mut spec = spec.clone();
        if with_branch {
            spec.branches = vec![MaxwellBranch { mu_v: 35.0, tau: 0.4 }];
        }
        let ga = GAlphaParams::default();
        let dt = 0.05;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let (f, h) = random_state(&mut rng);
            let state = kinematics(&f).unwrap();
            if let HyperModel::Gent { i_m } = spec.model {
                if state.i1bar - 3.0 > 0.5 * i_m {
                    continue;
                }
            }
            let ba = Vector3::new(0.5, -0.3, 0.8);
            let mut qp = QuadPointState::initial(&spec.taus());
            // make the history non-trivial
            for b in &mut qp.branches {
                b.value_n = (Tensor2::IDENTITY * 0.8 + state.cbar_inv * 0.2).sym();
                b.rate_n = (state.cbar_inv - b.value_n) * (1.0 / 0.4);
            }
            let a_list: Vec<Tensor2> = spec
                .branches
                .iter()
                .zip(&qp.branches)
                .map(|(br, bs)| {
                    update_branch(
                        &bs.value_n,
                        &bs.rate_n,
                        &qp.cbar_inv_n,
                        &state.cbar_inv,
                        br.tau,
                        dt,
                        &ga,
                    )
                    .0
                })
                .collect();
            let analytic =
                assemble_point_response(&spec, &state, &h, &ba, 0.0, &a_list, &ga, dt).unwrap();
            let fdt = fd_tangent_oracle(&spec, &f, &h, &ba, &qp, &ga, dt).unwrap();

            let scale = analytic.e_mat.norm().max(fdt.e_mat.norm());
            assert!(
                analytic.e_mat.max_abs_diff(&fdt.e_mat) <= 1e-6 * scale.max(1e-9),
                "tangent mismatch: {} vs scale {}",
                analytic.e_mat.max_abs_diff(&fdt.e_mat),
                scale
            );
            if matches!(spec.magnetic, MagneticMode::Soft { .. }) {
                let sp = analytic.coup_uphi.norm().max(1e-9);
                assert!(analytic.coup_uphi.max_abs_diff(&fdt.coup_uphi) <= 1e-6 * sp);
                let sph = analytic.coup_phiu.norm().max(1e-9);
                assert!(analytic.coup_phiu.max_abs_diff(&fdt.coup_phiu) <= 1e-6 * sph);
                let sd = analytic.d_perm.norm().max(1e-9);
                assert!(analytic.d_perm.max_abs_diff(&fdt.d_perm) <= 1e-6 * sd);
            }
        }
    }

    fn base(model: HyperModel, magnetic: MagneticMode) -> MaterialSpec {
        MaterialSpec {
            model,
            mu: 80.0,
            incompressible: true,
            kappa: 0.0,
            branches: vec![],
            mu0: MU0_DEFAULT,
            magnetic,
        }
    }

    #[test]
    fn neo_hookean_hard_matches_fd() {
        let spec = base(
            HyperModel::NeoHookean,
            MagneticMode::Hard {
                b_r: Vector3::new(0.0, 1.2, 0.0),
            },
        );
        check_mode(&spec, false, 11);
        check_mode(&spec, true, 12);
    }

    #[test]
    fn gent_hard_matches_fd() {
        let spec = base(
            HyperModel::Gent { i_m: 5.0 },
            MagneticMode::Hard {
                b_r: Vector3::new(1.0, 0.0, 0.0),
            },
        );
        check_mode(&spec, false, 21);
        check_mode(&spec, true, 22);
    }

    #[test]
    fn neo_hookean_soft_matches_fd() {
        let spec = base(HyperModel::NeoHookean, MagneticMode::soft_default());
        check_mode(&spec, false, 31);
        check_mode(&spec, true, 32);
    }

    #[test]
    fn gent_soft_matches_fd() {
        let spec = base(HyperModel::Gent { i_m: 8.0 }, MagneticMode::soft_default());
        check_mode(&spec, false, 41);
        check_mode(&spec, true, 42);
    }

    #[test]
    fn hard_magnetic_term_has_zero_tangent() {
        // difference the magnetic term alone: P is constant in F
        let spec = base(
            HyperModel::NeoHookean,
            MagneticMode::Hard {
                b_r: Vector3::new(0.7, 0.2, -0.4),
            },
        );
        let mut no_magn = spec.clone();
        no_magn.magnetic = MagneticMode::None;
        let f = Tensor2([1.1, 0.05, 0.0, -0.02, 0.93, 0.07, 0.01, 0.0, 1.04]);
        let qp = QuadPointState::initial(&[]);
        let ga = GAlphaParams::default();
        let ba = Vector3::new(0.4, 0.9, -0.1);
        let with = fd_tangent_oracle(&spec, &f, &Vector3::ZERO, &ba, &qp, &ga, 0.0).unwrap();
        let without =
            fd_tangent_oracle(&no_magn, &f, &Vector3::ZERO, &ba, &qp, &ga, 0.0).unwrap();
        let diff = with.e_mat.max_abs_diff(&without.e_mat);
        assert!(
            diff <= 1e-6 * without.e_mat.norm(),
            "hard term leaked into tangent: {diff}"
        );
    }

    #[test]
    fn soft_coupling_blocks_pair_as_transposes() {
        let spec = base(HyperModel::NeoHookean, MagneticMode::soft_default());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let (f, h) = random_state(&mut rng);
            let state = kinematics(&f).unwrap();
            let soft = crate::constitutive::eval_soft_magnetic(&spec, &state, &h);
            let mut worst = 0.0f64;
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        worst = worst
                            .max((soft.coup_phiu.at(k, i, j) - soft.coup_uphi.at(i, j, k)).abs());
                    }
                }
            }
            assert!(worst <= 1e-10 * soft.coup_uphi.norm().max(1e-12));
        }
    }
}
