use std::ops::{Deref, DerefMut};

use crate::error::{check_len, Result};

/// Flat parameter vector of a model (weights and biases, layer by layer).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &[f64]) -> Result<f64> {
        check_len("dot product", self.len(), other.len())?;
        Ok(dot(&self.0, other))
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, scale: f64, other: &[f64]) -> Result<ParamVector> {
        check_len("add_scaled", self.len(), other.len())?;
        Ok(self
            .0
            .iter()
            .zip(other)
            .map(|(a, b)| a + scale * b)
            .collect())
    }

    pub fn scaled(&self, scale: f64) -> ParamVector {
        self.0.iter().map(|v| v * scale).collect()
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

impl FromIterator<f64> for ParamVector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        ParamVector(iter.into_iter().collect())
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl AsRef<[f64]> for ParamVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
