//! Observed (or simulated) multivariate return series.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// An n x d matrix of observations; row t is the return vector at time t.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    data: DMatrix<f64>,
}

impl Series {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::EmptySeries);
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::DimensionMismatch(
                "series contains non-finite entries".into(),
            ));
        }
        Ok(Self { data })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn value(&self, t: usize, i: usize) -> f64 {
        self.data[(t, i)]
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Swaps two component columns, for equivariance checks.
    pub fn with_swapped_columns(&self, a: usize, b: usize) -> Series {
        let mut m = self.data.clone();
        m.swap_columns(a, b);
        Series { data: m }
    }
}
