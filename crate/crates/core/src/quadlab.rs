//! Gradient descent on `L(theta) = 0.5 theta^T Q diag(lambda) Q^T theta`.
//!
//! Along eigendirection `i` the error obeys `e_{t+1} = (1 - eta lambda_i) e_t`,
//! so `|1 - eta lambda_i|` is the per-step contraction and its sign decides
//! whether the coordinate creeps toward zero or flips sides every step.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::objective::Objective;
use crate::optim::gd_step;
use crate::params::ParamVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DampingClass {
    /// `eta lambda < 1`: monotone decay.
    Overdamped,
    /// `eta lambda = 1`: exact convergence in one step.
    Critical,
    /// `1 < eta lambda < 2`: sign-alternating decay.
    Underdamped,
    /// `eta lambda = 2`: oscillation with constant amplitude.
    Boundary,
    /// `eta lambda > 2`
    Divergent,
}

impl DampingClass {
    pub const ALL: [DampingClass; 5] = [
        DampingClass::Overdamped,
        DampingClass::Critical,
        DampingClass::Underdamped,
        DampingClass::Boundary,
        DampingClass::Divergent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DampingClass::Overdamped => "overdamped",
            DampingClass::Critical => "critical",
            DampingClass::Underdamped => "underdamped",
            DampingClass::Boundary => "boundary",
            DampingClass::Divergent => "divergent",
        }
    }
}

impl fmt::Display for DampingClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DampingClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DampingClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown damping class '{s}'")))
    }
}

pub fn contraction_rate(lambda: f64, eta: f64) -> f64 {
    (1.0 - eta * lambda).abs()
}

pub fn damping_class(lambda: f64, eta: f64) -> DampingClass {
    let x = eta * lambda;
    if x < 1.0 {
        DampingClass::Overdamped
    } else if x == 1.0 {
        DampingClass::Critical
    } else if x < 2.0 {
        DampingClass::Underdamped
    } else if x == 2.0 {
        DampingClass::Boundary
    } else {
        DampingClass::Divergent
    }
}

#[derive(Clone, Debug)]
pub struct QuadSurface {
    eigenvalues: Vec<f64>,
    rotation: Option<DMatrix<f64>>,
}

impl QuadSurface {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() || eigenvalues.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "quadratic surface needs positive eigenvalues, got {eigenvalues:?}"
            )));
        }
        Ok(QuadSurface {
            eigenvalues,
            rotation: None,
        })
    }

    pub fn with_rotation(mut self, q: DMatrix<f64>) -> Result<Self> {
        let n = self.eigenvalues.len();
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "rotation matrix",
                expected: n,
                actual: q.nrows(),
            });
        }
        let dev = (q.transpose() * &q - DMatrix::<f64>::identity(n, n)).abs().max();
        if dev > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "rotation is not orthogonal (max |Q^T Q - I| = {dev:e})"
            )));
        }
        self.rotation = Some(q);
        Ok(self)
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenbasis coordinates `Q^T theta`.
    pub fn to_eigenbasis(&self, theta: &[f64]) -> Vec<f64> {
        match &self.rotation {
            None => theta.to_vec(),
            Some(q) => (q.transpose() * DVector::from_column_slice(theta)).as_slice().to_vec(),
        }
    }

    fn to_standard_basis(&self, e: &[f64]) -> Vec<f64> {
        match &self.rotation {
            None => e.to_vec(),
            Some(q) => (q * DVector::from_column_slice(e)).as_slice().to_vec(),
        }
    }

    pub fn gradient(&self, theta: &[f64]) -> ParamVector {
        let e = self.to_eigenbasis(theta);
        let scaled: Vec<f64> = e.iter().zip(&self.eigenvalues).map(|(x, l)| l * x).collect();
        self.to_standard_basis(&scaled).into()
    }
}

impl Objective for QuadSurface {
    fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn loss(&self, theta: &[f64]) -> Result<f64> {
        check_len("quadratic surface argument", self.dim(), theta.len())?;
        let e = self.to_eigenbasis(theta);
        Ok(0.5 * e.iter().zip(&self.eigenvalues).map(|(x, l)| l * x * x).sum::<f64>())
    }

    fn loss_and_grad(&self, theta: &[f64]) -> Result<(f64, ParamVector)> {
        Ok((self.loss(theta)?, self.gradient(theta)))
    }
}

/// `steps` plain GD updates from `theta0`; returns `steps + 1` iterates.
pub fn quad_gd_trajectory(surface: &QuadSurface, eta: f64, theta0: &[f64], steps: usize) -> Result<Vec<ParamVector>> {
    check_len("quadratic trajectory start", surface.dim(), theta0.len())?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(ParamVector::from(theta0.to_vec()));
    for _ in 0..steps {
        let cur = out.last().unwrap();
        let next = gd_step(cur, &surface.gradient(cur), eta)?;
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::cosine;

    #[test]
    fn rates() {
        assert_eq!(contraction_rate(2.0, 0.5), 0.0);
        assert_eq!(contraction_rate(1.0, 1.5), 0.5);
        assert_eq!(contraction_rate(1.0, 2.5), 1.5);
    }

    #[test]
    fn classes() {
        assert_eq!(damping_class(2.0, 0.3), DampingClass::Overdamped);
        assert_eq!(damping_class(2.0, 0.5), DampingClass::Critical);
        assert_eq!(damping_class(2.0, 0.75), DampingClass::Underdamped);
        assert_eq!(damping_class(2.0, 1.0), DampingClass::Boundary);
        assert_eq!(damping_class(2.0, 1.5), DampingClass::Divergent);
        for c in DampingClass::ALL {
            assert_eq!(c.as_str().parse::<DampingClass>().unwrap(), c);
        }
    }

    #[test]
    fn surface_validation() {
        assert!(QuadSurface::new(vec![1.0, 0.0]).is_err());
        assert!(QuadSurface::new(vec![]).is_err());
        let s = QuadSurface::new(vec![1.0, 2.0]).unwrap();
        let skew = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(s.with_rotation(skew).is_err());
    }

    #[test]
    fn underdamped_coordinate_alternates_sign_and_cosine_is_minus_one() {
        let s = QuadSurface::new(vec![2.0]).unwrap();
        let traj = quad_gd_trajectory(&s, 0.75, &[1.0], 20).unwrap();
        for w in traj.windows(2) {
            assert!(w[0][0] * w[1][0] < 0.0);
        }
        for w in traj.windows(2) {
            let c = cosine(&s.gradient(&w[0]), &s.gradient(&w[1])).unwrap().unwrap();
            assert_eq!(c, -1.0);
        }
        let traj = quad_gd_trajectory(&s, 0.3, &[1.0], 20).unwrap();
        for w in traj.windows(2) {
            let c = cosine(&s.gradient(&w[0]), &s.gradient(&w[1])).unwrap().unwrap();
            assert_eq!(c, 1.0);
        }
    }
}
