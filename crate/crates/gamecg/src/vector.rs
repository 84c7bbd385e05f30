//! Dense parameter vectors with fail-fast finiteness checks.
//!
//! Iterates, gradients and search directions are all [`ParameterVector`]s.
//! Construction and every arithmetic operation reject NaN and infinity so a
//! numerical blow-up surfaces where it happens instead of three modules later.

use crate::error::{Error, Result};

/// A player's parameter block (iterate, gradient or direction).
///
/// Invariants: dimension >= 1, every entry finite. Both are enforced at
/// construction; operations that could break finiteness re-check their output.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
}

impl ParameterVector {
    /// Builds a vector, rejecting empty or non-finite input.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument(
                "parameter vector must have dimension >= 1".into(),
            ));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "ParameterVector::new".into(),
            });
        }
        Ok(Self { values })
    }

    /// The all-zeros vector of dimension `dim`.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be >= 1");
        Self {
            values: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Euclidean inner product. Errors on dimension mismatch or a non-finite
    /// result (possible via overflow even for finite inputs).
    pub fn dot(&self, other: &Self) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        if !s.is_finite() {
            return Err(Error::NonFinite {
                context: "dot product".into(),
            });
        }
        Ok(s)
    }

    /// Euclidean norm. Never fails: entries are finite by invariant and the
    /// sum of squares is computed in a hypot-safe range for our magnitudes.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `alpha * self + other`, the BLAS axpy. Checked like `dot`.
    pub fn axpy(&self, alpha: f64, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        if !alpha.is_finite() {
            return Err(Error::NonFinite {
                context: "axpy coefficient".into(),
            });
        }
        let values: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + b)
            .collect();
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "axpy result".into(),
            });
        }
        Ok(Self { values })
    }

    /// `self - other`, checked.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        other.axpy(-1.0, self)
    }

    /// `scale * self`, checked.
    pub fn scale(&self, scale: f64) -> Result<Self> {
        self.axpy(scale, &Self::zeros(self.dim()))
    }

    /// Entry-wise negation (exact; never rounds).
    pub fn neg(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| -v).collect(),
        }
    }
}
