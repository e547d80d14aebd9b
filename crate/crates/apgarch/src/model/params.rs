//! Model order, parameter container and validation.
//!
//! The flat parameter vector follows the order
//! (omega, vec(A1+)..vec(Aq+), vec(A1-)..vec(Aq-), vec(B1)..vec(Bp), rho[, delta])
//! with matrices stacked column-major and rho the strict lower triangle of R
//! in row-major order.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_sqrt_inv, SymMatrix, SymOps};

/// Whether the power vector delta is held fixed or estimated with the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PowerMode {
    KnownDelta,
    EstimatedDelta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelOrder {
    /// Series dimension.
    pub d: usize,
    /// Number of lagged volatility terms.
    pub p: usize,
    /// Number of lagged shock terms.
    pub q: usize,
    pub power_mode: PowerMode,
}

impl ModelOrder {
    pub fn new(d: usize, p: usize, q: usize, power_mode: PowerMode) -> Self {
        Self {
            d,
            p,
            q,
            power_mode,
        }
    }

    /// Number of free coordinates: d + d^2 (p + 2q) + d(d-1)/2, plus d deltas
    /// when the power is estimated.
    pub fn param_count(&self) -> usize {
        let base = self.volatility_count() + self.rho_count();
        match self.power_mode {
            PowerMode::KnownDelta => base,
            PowerMode::EstimatedDelta => base + self.d,
        }
    }

    /// Coordinates driving the volatility recursion (omega, A+, A-, B).
    pub fn volatility_count(&self) -> usize {
        self.d + self.d * self.d * (self.p + 2 * self.q)
    }

    pub fn rho_count(&self) -> usize {
        self.d * (self.d - 1) / 2
    }

    pub fn max_lag(&self) -> usize {
        self.p.max(self.q)
    }

    // Block offsets in the flat vector.
    pub fn omega_offset(&self) -> usize {
        0
    }
    pub fn a_plus_offset(&self) -> usize {
        self.d
    }
    pub fn a_minus_offset(&self) -> usize {
        self.d + self.q * self.d * self.d
    }
    pub fn b_offset(&self) -> usize {
        self.d + 2 * self.q * self.d * self.d
    }
    pub fn rho_offset(&self) -> usize {
        self.volatility_count()
    }
    pub fn delta_offset(&self) -> usize {
        self.volatility_count() + self.rho_count()
    }

    /// Flat index of matrix entry (row, col) of lag `lag` inside a block that
    /// starts at `offset` (column-major within each matrix).
    pub fn mat_index(&self, offset: usize, lag: usize, row: usize, col: usize) -> usize {
        offset + lag * self.d * self.d + col * self.d + row
    }
}

/// Row-major enumeration of the strict lower-triangle pairs (row > col).
pub fn lower_triangle_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(d * (d - 1) / 2);
    for r in 1..d {
        for c in 0..r {
            out.push((r, c));
        }
    }
    out
}

/// Full parameter set of a model instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub omega: DVector<f64>,
    pub a_plus: Vec<DMatrix<f64>>,
    pub a_minus: Vec<DMatrix<f64>>,
    pub b: Vec<DMatrix<f64>>,
    /// Strict lower triangle of the correlation matrix, row-major.
    pub rho: DVector<f64>,
    pub delta: DVector<f64>,
}

impl Params {
    /// Builds the correlation matrix R from rho.
    pub fn correlation_matrix(&self, d: usize) -> DMatrix<f64> {
        let mut r = DMatrix::identity(d, d);
        for (k, (i, j)) in lower_triangle_pairs(d).into_iter().enumerate() {
            r[(i, j)] = self.rho[k];
            r[(j, i)] = self.rho[k];
        }
        r
    }

    /// R together with its inverse, roots and log-determinant.
    pub fn correlation_ops(&self, d: usize) -> Result<SymOps> {
        let r = SymMatrix::new(self.correlation_matrix(d))?;
        sym_sqrt_inv(&r).map_err(|e| match e {
            Error::NotPositiveDefinite { min_eigenvalue } => Error::InvalidCorrelation(format!(
                "R is not positive definite (smallest eigenvalue {min_eigenvalue:e})"
            )),
            other => other,
        })
    }

    /// Flattens to the canonical coordinate vector (length `order.param_count()`).
    pub fn to_vector(&self, order: &ModelOrder) -> DVector<f64> {
        let d = order.d;
        let mut v = DVector::zeros(order.param_count());
        for i in 0..d {
            v[i] = self.omega[i];
        }
        for (lag, m) in self.a_plus.iter().enumerate() {
            for c in 0..d {
                for r in 0..d {
                    v[order.mat_index(order.a_plus_offset(), lag, r, c)] = m[(r, c)];
                }
            }
        }
        for (lag, m) in self.a_minus.iter().enumerate() {
            for c in 0..d {
                for r in 0..d {
                    v[order.mat_index(order.a_minus_offset(), lag, r, c)] = m[(r, c)];
                }
            }
        }
        for (lag, m) in self.b.iter().enumerate() {
            for c in 0..d {
                for r in 0..d {
                    v[order.mat_index(order.b_offset(), lag, r, c)] = m[(r, c)];
                }
            }
        }
        for k in 0..order.rho_count() {
            v[order.rho_offset() + k] = self.rho[k];
        }
        if order.power_mode == PowerMode::EstimatedDelta {
            for i in 0..d {
                v[order.delta_offset() + i] = self.delta[i];
            }
        }
        v
    }

    /// Rebuilds a parameter set from the canonical coordinate vector.
    ///
    /// In `KnownDelta` mode the delta of `template` is carried over.
    pub fn from_vector(order: &ModelOrder, v: &DVector<f64>, template: &Params) -> Params {
        let d = order.d;
        let omega = DVector::from_fn(d, |i, _| v[i]);
        let block = |offset: usize, count: usize| -> Vec<DMatrix<f64>> {
            (0..count)
                .map(|lag| DMatrix::from_fn(d, d, |r, c| v[order.mat_index(offset, lag, r, c)]))
                .collect()
        };
        let a_plus = block(order.a_plus_offset(), order.q);
        let a_minus = block(order.a_minus_offset(), order.q);
        let b = block(order.b_offset(), order.p);
        let rho = DVector::from_fn(order.rho_count(), |k, _| v[order.rho_offset() + k]);
        let delta = match order.power_mode {
            PowerMode::KnownDelta => template.delta.clone(),
            PowerMode::EstimatedDelta => DVector::from_fn(d, |i, _| v[order.delta_offset() + i]),
        };
        Params {
            omega,
            a_plus,
            a_minus,
            b,
            rho,
            delta,
        }
    }
}

/// Checks dimensions and the positivity/nonnegativity/correlation constraints.
/// Returns the params untouched when everything holds.
pub fn validate_params(order: &ModelOrder, params: Params) -> Result<Params> {
    let d = order.d;
    if params.omega.len() != d
        || params.delta.len() != d
        || params.a_plus.len() != order.q
        || params.a_minus.len() != order.q
        || params.b.len() != order.p
        || params.rho.len() != order.rho_count()
    {
        return Err(Error::DimensionMismatch(format!(
            "parameter blocks do not match order (d={d}, p={}, q={})",
            order.p, order.q
        )));
    }
    for i in 0..d {
        if !(params.omega[i] > 0.0) {
            return Err(Error::InvalidOmega {
                index: i,
                value: params.omega[i],
            });
        }
        if !(params.delta[i] > 0.0) {
            return Err(Error::InvalidDelta {
                index: i,
                value: params.delta[i],
            });
        }
    }
    let check_block = |mats: &[DMatrix<f64>], name: &'static str| -> Result<()> {
        for m in mats {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "{name} matrix must be {d}x{d}"
                )));
            }
            for r in 0..d {
                for c in 0..d {
                    if !(m[(r, c)] >= 0.0) {
                        return Err(Error::NegativeCoefficient {
                            block: name,
                            row: r,
                            col: c,
                            value: m[(r, c)],
                        });
                    }
                }
            }
        }
        Ok(())
    };
    check_block(&params.a_plus, "A+")?;
    check_block(&params.a_minus, "A-")?;
    check_block(&params.b, "B")?;
    for (k, &r) in params.rho.iter().enumerate() {
        if !(r > -1.0 && r < 1.0) {
            return Err(Error::InvalidCorrelation(format!(
                "rho[{k}]={r} outside (-1,1)"
            )));
        }
    }
    params.correlation_ops(d)?;
    Ok(params)
}
