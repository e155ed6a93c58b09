//! Bernstein tensor-product bases on the unit cube.
//!
//! The displacement and potential fields use the 27-node triquadratic basis,
//! the pressure field the 8-node trilinear one. Bernstein polynomials are
//! interpolatory only at the corners; interior control values are set by
//! sampling prescribed data at the uniform (Greville) grid positions, which
//! is exact for affine data. Node ordering is lexicographic with x fastest:
//! node `(i, j, k)` sits at `i + (d+1) j + (d+1)^2 k`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BasisError {
    #[error("unsupported basis degree {0} (supported: 1, 2)")]
    UnsupportedDegree(usize),
}

/// One-dimensional Bernstein values and derivatives at `xi` in `[0, 1]`.
pub fn bernstein1d(degree: usize, xi: f64) -> Result<(Vec<f64>, Vec<f64>), BasisError> {
    match degree {
        1 => Ok((vec![1.0 - xi, xi], vec![-1.0, 1.0])),
        2 => {
            let s = 1.0 - xi;
            Ok((
                vec![s * s, 2.0 * xi * s, xi * xi],
                vec![-2.0 * s, 2.0 - 4.0 * xi, 2.0 * xi],
            ))
        }
        d => Err(BasisError::UnsupportedDegree(d)),
    }
}

/// Triquadratic values and parent-space gradients at a point of `[0,1]^3`.
pub fn bq2_basis(xi: [f64; 3]) -> ([f64; 27], [[f64; 3]; 27]) {
    let (vx, dx) = bernstein1d(2, xi[0]).unwrap();
    let (vy, dy) = bernstein1d(2, xi[1]).unwrap();
    let (vz, dz) = bernstein1d(2, xi[2]).unwrap();
    let mut vals = [0.0; 27];
    let mut grads = [[0.0; 3]; 27];
    for k in 0..3 {
        for j in 0..3 {
            for i in 0..3 {
                let n = i + 3 * j + 9 * k;
                vals[n] = vx[i] * vy[j] * vz[k];
                grads[n] = [
                    dx[i] * vy[j] * vz[k],
                    vx[i] * dy[j] * vz[k],
                    vx[i] * vy[j] * dz[k],
                ];
            }
        }
    }
    (vals, grads)
}

/// Trilinear values and parent-space gradients at a point of `[0,1]^3`.
pub fn bq1_basis(xi: [f64; 3]) -> ([f64; 8], [[f64; 3]; 8]) {
    let (vx, dx) = bernstein1d(1, xi[0]).unwrap();
    let (vy, dy) = bernstein1d(1, xi[1]).unwrap();
    let (vz, dz) = bernstein1d(1, xi[2]).unwrap();
    let mut vals = [0.0; 8];
    let mut grads = [[0.0; 3]; 8];
    for k in 0..2 {
        for j in 0..2 {
            for i in 0..2 {
                let n = i + 2 * j + 4 * k;
                vals[n] = vx[i] * vy[j] * vz[k];
                grads[n] = [
                    dx[i] * vy[j] * vz[k],
                    vx[i] * dy[j] * vz[k],
                    vx[i] * vy[j] * dz[k],
                ];
            }
        }
    }
    (vals, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_endpoint_and_midpoint() {
        let (v, _) = bernstein1d(2, 0.0).unwrap();
        assert_eq!(v, vec![1.0, 0.0, 0.0]);
        let (v, _) = bernstein1d(2, 0.5).unwrap();
        assert_eq!(v, vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn linear_values_and_derivatives() {
        let (v, d) = bernstein1d(1, 0.3).unwrap();
        assert!((v[0] - 0.7).abs() < 1e-15 && (v[1] - 0.3).abs() < 1e-15);
        assert_eq!(d, vec![-1.0, 1.0]);
    }

    #[test]
    fn rejects_unsupported_degree() {
        assert_eq!(
            bernstein1d(3, 0.5).unwrap_err(),
            BasisError::UnsupportedDegree(3)
        );
        assert!(bernstein1d(0, 0.5).is_err());
    }

    #[test]
    fn partition_of_unity_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let xi = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
            let (v2, g2) = bq2_basis(xi);
            let sum: f64 = v2.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-13);
            for dir in 0..3 {
                let dsum: f64 = g2.iter().map(|g| g[dir]).sum();
                assert!(dsum.abs() <= 1e-13);
            }
            let (v1, g1) = bq1_basis(xi);
            assert!((v1.iter().sum::<f64>() - 1.0).abs() <= 1e-13);
            for dir in 0..3 {
                assert!(g1.iter().map(|g| g[dir]).sum::<f64>().abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let xi = [0.37, 0.81, 0.12];
        let h = 1e-6;
        let (_, g) = bq2_basis(xi);
        for dir in 0..3 {
            let mut xp = xi;
            let mut xm = xi;
            xp[dir] += h;
            xm[dir] -= h;
            let (vp, _) = bq2_basis(xp);
            let (vm, _) = bq2_basis(xm);
            for n in 0..27 {
                let fd = (vp[n] - vm[n]) / (2.0 * h);
                assert!((g[n][dir] - fd).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn uniform_control_grid_reproduces_affine_geometry() {
        // control values at the uniform grid positions give an affine map
        let coords = [0.0, 0.5, 1.0];
        let xi = [0.3, 0.7, 0.45];
        let (v, _) = bq2_basis(xi);
        let mut x = [0.0; 3];
        for k in 0..3 {
            for j in 0..3 {
                for i in 0..3 {
                    let n = i + 3 * j + 9 * k;
                    x[0] += v[n] * coords[i];
                    x[1] += v[n] * coords[j];
                    x[2] += v[n] * coords[k];
                }
            }
        }
        for d in 0..3 {
            assert!((x[d] - xi[d]).abs() < 1e-14);
        }
    }
}
