//! Symmetric positive-definite matrix kernels.
//!
//! All square roots in this crate are the symmetric (spectral) root obtained
//! from an eigendecomposition; the residual transform eta = H^{-1/2} eps uses
//! this convention throughout.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// A symmetric real matrix, validated at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Wraps a matrix, checking symmetry to 1e-12 relative and enforcing it
    /// exactly by averaging with the transpose.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1.0);
        for i in 0..m.nrows() {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::DimensionMismatch(format!(
                        "matrix is not symmetric at ({i},{j}): {} vs {}",
                        m[(i, j)],
                        m[(j, i)]
                    )));
                }
            }
        }
        let sym = 0.5 * (&m + m.transpose());
        Ok(Self(sym))
    }

    /// Symmetrizes without the tolerance check, for matrices that are
    /// symmetric by construction up to rounding.
    pub fn from_symmetric_unchecked(m: DMatrix<f64>) -> Self {
        let sym = 0.5 * (&m + m.transpose());
        Self(sym)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

/// Spectral square root, inverse root, inverse and log-determinant of a PD matrix.
#[derive(Debug, Clone)]
pub struct SymOps {
    pub sqrt: DMatrix<f64>,
    pub inv_sqrt: DMatrix<f64>,
    pub inv: DMatrix<f64>,
    pub logdet: f64,
}

/// Eigendecomposes a symmetric PD matrix and returns its root, inverse root,
/// inverse and log-determinant.
///
/// A matrix is declared not positive definite when any eigenvalue falls below
/// 1e-10 times its largest diagonal entry.
pub fn sym_sqrt_inv(m: &SymMatrix) -> Result<SymOps> {
    let a = m.as_matrix();
    let eps_pd = 1e-10
        * a.diagonal()
            .iter()
            .fold(f64::MIN, |acc, &v| acc.max(v))
            .max(f64::MIN_POSITIVE);
    let eig = SymmetricEigen::new(a.clone());
    let min_ev = eig.eigenvalues.min();
    if !(min_ev >= eps_pd) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min_ev,
        });
    }
    let v = &eig.eigenvectors;
    let d = m.dim();
    let mut sqrt = DMatrix::zeros(d, d);
    let mut inv_sqrt = DMatrix::zeros(d, d);
    let mut inv = DMatrix::zeros(d, d);
    let mut logdet = 0.0;
    // reconstruct V f(L) V' for each spectral function
    for k in 0..d {
        let lam = eig.eigenvalues[k];
        logdet += lam.ln();
        let vk = v.column(k);
        let (s, is, iv) = (lam.sqrt(), 1.0 / lam.sqrt(), 1.0 / lam);
        for i in 0..d {
            for j in 0..d {
                let outer = vk[i] * vk[j];
                sqrt[(i, j)] += s * outer;
                inv_sqrt[(i, j)] += is * outer;
                inv[(i, j)] += iv * outer;
            }
        }
    }
    Ok(SymOps {
        sqrt,
        inv_sqrt,
        inv,
        logdet,
    })
}

/// Condition number (ratio of extreme absolute eigenvalues) of a symmetric matrix.
pub fn sym_condition_number(m: &DMatrix<f64>) -> f64 {
    let sym = SymMatrix::from_symmetric_unchecked(m.clone());
    let eig = SymmetricEigen::new(sym.into_matrix());
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let min = eig
        .eigenvalues
        .iter()
        .fold(f64::MAX, |a, &v| a.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
