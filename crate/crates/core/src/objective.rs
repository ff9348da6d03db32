//! Scalar objectives over a flat parameter vector.
//!
//! The interpolation and curvature code only needs a loss and its gradient, so
//! it is written against [`Objective`]; the MLP over a fixed dataset and plain
//! quadratic forms both implement it.

use nalgebra::DMatrix;

use crate::error::{check_len, Result};
use crate::net::{forward_loss, loss_and_grad, Batch, MlpSpec};
use crate::params::ParamVector;

pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn loss(&self, theta: &[f64]) -> Result<f64>;
    fn loss_and_grad(&self, theta: &[f64]) -> Result<(f64, ParamVector)>;
}

/// Full-batch loss of an MLP on a fixed set of samples.
#[derive(Clone, Copy)]
pub struct MlpObjective<'a> {
    pub spec: &'a MlpSpec,
    pub batch: &'a Batch,
}

impl<'a> MlpObjective<'a> {
    pub fn new(spec: &'a MlpSpec, batch: &'a Batch) -> Self {
        MlpObjective { spec, batch }
    }
}

impl Objective for MlpObjective<'_> {
    fn dim(&self) -> usize {
        self.spec.param_count()
    }

    fn loss(&self, theta: &[f64]) -> Result<f64> {
        forward_loss(self.spec, theta, self.batch)
    }

    fn loss_and_grad(&self, theta: &[f64]) -> Result<(f64, ParamVector)> {
        loss_and_grad(self.spec, theta, self.batch)
    }
}

/// `L(theta) = 0.5 * theta^T A theta` for a symmetric (possibly indefinite) `A`.
#[derive(Clone, Debug)]
pub struct QuadraticForm {
    matrix: DMatrix<f64>,
}

impl QuadraticForm {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        assert!(matrix.is_square(), "quadratic form needs a square matrix");
        let sym = (&matrix + matrix.transpose()) * 0.5;
        QuadraticForm { matrix: sym }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        QuadraticForm::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    fn apply(&self, theta: &[f64]) -> Vec<f64> {
        let n = self.matrix.nrows();
        (0..n)
            .map(|i| (0..n).map(|j| self.matrix[(i, j)] * theta[j]).sum())
            .collect()
    }
}

impl Objective for QuadraticForm {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn loss(&self, theta: &[f64]) -> Result<f64> {
        check_len("quadratic form argument", self.dim(), theta.len())?;
        let a = self.apply(theta);
        Ok(0.5 * a.iter().zip(theta).map(|(x, y)| x * y).sum::<f64>())
    }

    fn loss_and_grad(&self, theta: &[f64]) -> Result<(f64, ParamVector)> {
        check_len("quadratic form argument", self.dim(), theta.len())?;
        let a = self.apply(theta);
        let loss = 0.5 * a.iter().zip(theta).map(|(x, y)| x * y).sum::<f64>();
        Ok((loss, a.into()))
    }
}
