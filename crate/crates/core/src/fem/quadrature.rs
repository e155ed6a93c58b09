//! Tensor-product Gauss-Legendre rules on the unit cube `[0,1]^3`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QuadratureError {
    #[error("unsupported quadrature order {0} (supported: 2, 3, 4 points per direction)")]
    UnsupportedRule(usize),
}

/// One integration point: parent coordinate and weight (weights over the
/// unit cube sum to one).
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub coord: [f64; 3],
    pub weight: f64,
}

fn gauss_1d(n: usize) -> Result<(Vec<f64>, Vec<f64>), QuadratureError> {
    // abscissae on [-1, 1], mapped below to [0, 1]
    let (x, w): (Vec<f64>, Vec<f64>) = match n {
        2 => {
            let a = 1.0 / 3.0f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let a = 0.339_981_043_584_856_3;
            let b = 0.861_136_311_594_052_6;
            let wa = 0.652_145_154_862_546_1;
            let wb = 0.347_854_845_137_453_86;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        other => return Err(QuadratureError::UnsupportedRule(other)),
    };
    Ok((
        x.iter().map(|v| 0.5 * (v + 1.0)).collect(),
        w.iter().map(|v| 0.5 * v).collect(),
    ))
}

/// Full tensor-product rule with `points_per_dir` points per direction.
pub fn gauss_rule(points_per_dir: usize) -> Result<Vec<QuadPoint>, QuadratureError> {
    let (x, w) = gauss_1d(points_per_dir)?;
    let mut out = Vec::with_capacity(points_per_dir.pow(3));
    for k in 0..points_per_dir {
        for j in 0..points_per_dir {
            for i in 0..points_per_dir {
                out.push(QuadPoint {
                    coord: [x[i], x[j], x[k]],
                    weight: w[i] * w[j] * w[k],
                });
            }
        }
    }
    Ok(out)
}

/// Tensor-product rule on a unit square, for face integrals.
pub fn gauss_rule_2d(points_per_dir: usize) -> Result<Vec<([f64; 2], f64)>, QuadratureError> {
    let (x, w) = gauss_1d(points_per_dir)?;
    let mut out = Vec::with_capacity(points_per_dir.pow(2));
    for j in 0..points_per_dir {
        for i in 0..points_per_dir {
            out.push(([x[i], x[j]], w[i] * w[j]));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        for n in [2, 3, 4] {
            let rule = gauss_rule(n).unwrap();
            assert_eq!(rule.len(), n * n * n);
            let s: f64 = rule.iter().map(|q| q.weight).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn three_points_integrate_quintics_exactly() {
        // per direction: int_0^1 xi^5 dxi = 1/6
        let rule = gauss_rule(3).unwrap();
        for dir in 0..3 {
            let s: f64 = rule
                .iter()
                .map(|q| q.weight * q.coord[dir].powi(5))
                .sum();
            assert!((s - 1.0 / 6.0).abs() < 1e-14);
        }
    }

    #[test]
    fn unsupported_orders_are_rejected() {
        assert!(gauss_rule(1).is_err());
        assert!(gauss_rule(5).is_err());
    }

    #[test]
    fn face_rule_integrates_bilinears() {
        let rule = gauss_rule_2d(3).unwrap();
        let s: f64 = rule.iter().map(|(c, w)| w * c[0] * c[1]).sum();
        assert!((s - 0.25).abs() < 1e-14);
    }
}
