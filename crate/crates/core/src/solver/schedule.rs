//! Time-dependent load programs and the step grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::Vector3;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("time grid must be strictly increasing and start after t = 0")]
    BadTimeGrid,
    #[error("program not defined: {0}")]
    BadProgram(String),
}

/// Scalar program of pseudo-time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Program {
    Constant { value: f64 },
    /// Linear between `(t0, from)` and `(t1, to)`, clamped outside.
    Ramp { t0: f64, t1: f64, from: f64, to: f64 },
    /// Linear from 0 to `peak` over `[0, t_ramp]`, held afterwards.
    RampHold { t_ramp: f64, peak: f64 },
    /// `(peak/2) (1 - cos(2 pi f t))`: starts at zero, reaches `peak` at the
    /// half period.
    Sinusoid { peak: f64, freq: f64 },
}

impl Program {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Program::Constant { value } => value,
            Program::Ramp { t0, t1, from, to } => {
                if t <= t0 {
                    from
                } else if t >= t1 {
                    to
                } else {
                    from + (to - from) * (t - t0) / (t1 - t0)
                }
            }
            Program::RampHold { t_ramp, peak } => {
                if t >= t_ramp {
                    peak
                } else {
                    peak * (t / t_ramp).max(0.0)
                }
            }
            Program::Sinusoid { peak, freq } => {
                0.5 * peak * (1.0 - (2.0 * std::f64::consts::PI * freq * t).cos())
            }
        }
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        match *self {
            Program::Ramp { t0, t1, .. } if t1 <= t0 => {
                Err(ScheduleError::BadProgram(format!("ramp needs t1 > t0 ({t0}, {t1})")))
            }
            Program::RampHold { t_ramp, .. } if t_ramp <= 0.0 => {
                Err(ScheduleError::BadProgram(format!("ramp-hold needs t_ramp > 0 ({t_ramp})")))
            }
            Program::Sinusoid { freq, .. } if freq <= 0.0 => {
                Err(ScheduleError::BadProgram(format!("sinusoid needs freq > 0 ({freq})")))
            }
            _ => Ok(()),
        }
    }
}

/// Spatially uniform applied flux density `direction * magnitude(t)`
/// (the load of the hard-magnetic problem).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AppliedField {
    pub direction: Vector3,
    pub magnitude: Program,
}

impl AppliedField {
    pub fn value(&self, t: f64) -> Vector3 {
        self.direction * self.magnitude.value(t)
    }
}

/// Which nodal unknown a Dirichlet condition pins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DofField {
    Ux,
    Uy,
    Uz,
    Phi,
}

/// Affine spatial weight `offset + gradient . X` multiplying a program,
/// sampled at the control-point (Greville) positions. Exact for affine
/// boundary data.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpatialProfile {
    pub offset: f64,
    pub gradient: [f64; 3],
}

impl SpatialProfile {
    pub fn eval(&self, x: &Vector3) -> f64 {
        self.offset
            + self.gradient[0] * x[0]
            + self.gradient[1] * x[1]
            + self.gradient[2] * x[2]
    }
}

/// Prescribed value on a named node or face set:
/// `value(t, X) = program(t) * spatial(X)` (spatial defaults to one).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirichletBc {
    pub set: String,
    pub field: DofField,
    pub program: Program,
    #[serde(default)]
    pub spatial: Option<SpatialProfile>,
}

impl DirichletBc {
    pub fn value_at(&self, t: f64, x: &Vector3) -> f64 {
        let base = self.program.value(t);
        match &self.spatial {
            Some(p) => base * p.eval(x),
            None => base,
        }
    }
}

/// Surface load on a named face set, per unit reference area.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SurfaceLoad {
    Traction { direction: Vector3, magnitude: Program },
    MagneticSurfaceDensity { magnitude: Program },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeumannBc {
    pub set: String,
    #[serde(flatten)]
    pub load: SurfaceLoad,
}

/// Builds a uniform step grid `dt, 2dt, ..., ~t_end`.
pub fn uniform_grid(dt: f64, t_end: f64) -> Result<Vec<f64>, ScheduleError> {
    if !(dt > 0.0 && t_end > 0.0) {
        return Err(ScheduleError::BadTimeGrid);
    }
    let n = (t_end / dt).round().max(1.0) as usize;
    Ok((1..=n).map(|i| i as f64 * dt).collect())
}

pub fn validate_grid(times: &[f64]) -> Result<(), ScheduleError> {
    if times.is_empty() || times[0] <= 0.0 {
        return Err(ScheduleError::BadTimeGrid);
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ScheduleError::BadTimeGrid);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_hold_shape() {
        let p = Program::RampHold { t_ramp: 10.0, peak: -200.0 };
        assert_eq!(p.value(0.0), 0.0);
        assert_eq!(p.value(5.0), -100.0);
        assert_eq!(p.value(10.0), -200.0);
        assert_eq!(p.value(25.0), -200.0);
    }

    #[test]
    fn sinusoid_starts_at_zero_and_peaks_at_half_period() {
        let p = Program::Sinusoid { peak: -1000.0, freq: 0.5 };
        assert_eq!(p.value(0.0), 0.0);
        assert!((p.value(1.0) - (-1000.0)).abs() < 1e-9);
        assert!((p.value(2.0)).abs() < 1e-9);
    }

    #[test]
    fn grid_construction_and_validation() {
        let g = uniform_grid(0.1, 1.0).unwrap();
        assert_eq!(g.len(), 10);
        assert!((g[9] - 1.0).abs() < 1e-12);
        assert!(validate_grid(&g).is_ok());
        assert!(validate_grid(&[0.0, 1.0]).is_err());
        assert!(validate_grid(&[1.0, 1.0]).is_err());
        assert!(uniform_grid(-0.1, 1.0).is_err());
    }
}
