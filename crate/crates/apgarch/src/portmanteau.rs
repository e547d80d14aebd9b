//! Adequacy diagnostics from autocovariances of the sum of squared residuals.
//!
//! With S_t = eps_t' H_t^{-1} eps_t - d, the lag-h autocovariance is
//! r_h = (1/n) sum_{t=h+1..n} S_t S_{t-h}. Its asymptotic covariance combines
//! the no-estimation leading term kappa^2 I_m with estimation-effect
//! corrections built from C_m, Sigma and the sandwich of the fit:
//!
//!   D = kappa^2 I_m + C J^{-1} I J^{-1} C' + C Sigma + Sigma' C'.
//!
//! The statistic n r' D^{-1} r is compared to a chi-square with m degrees of
//! freedom; the autocorrelation version divides D by kappa^2 and is
//! numerically identical here because r_0 = kappa.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::model::{
    volatility_derivatives, volatility_filter, DerivStack, InitPolicy, ModelOrder, Series,
    VolatilityPath,
};
use crate::qmle::FitResult;
use crate::special::{chi2_sf, normal_quantile};

/// Residual-level series feeding the test.
#[derive(Debug, Clone)]
pub struct DiagnosticSeries {
    /// S_t = eta_t' eta_t - d.
    pub s_hat: DVector<f64>,
    /// Row t is vec(eta_t eta_t' - I_d), column-major.
    pub s_vecs: DMatrix<f64>,
    /// kappa = (1/n) sum S_t^2, the estimate of E[S^2].
    pub kappa_hat: f64,
}

/// Builds S_t, the vec(eta eta' - I) rows and kappa from fitted residuals.
pub fn residual_diagnostics(fit: &FitResult, d: usize) -> DiagnosticSeries {
    diagnostics_from_residuals(&fit.residuals, d)
}

/// Same construction from a raw n x d residual matrix. With the symmetric
/// root, eta' eta equals the quadratic form eps' H^{-1} eps exactly.
pub fn diagnostics_from_residuals(residuals: &DMatrix<f64>, d: usize) -> DiagnosticSeries {
    let n = residuals.nrows();
    let mut s_hat = DVector::zeros(n);
    let mut s_vecs = DMatrix::zeros(n, d * d);
    for t in 0..n {
        let mut sum = 0.0;
        for a in 0..d {
            let ea = residuals[(t, a)];
            sum += ea * ea;
            for b in 0..d {
                let v = ea * residuals[(t, b)] - if a == b { 1.0 } else { 0.0 };
                s_vecs[(t, b * d + a)] = v;
            }
        }
        s_hat[t] = sum - d as f64;
    }
    let kappa_hat = s_hat.iter().map(|v| v * v).sum::<f64>() / n as f64;
    DiagnosticSeries {
        s_hat,
        s_vecs,
        kappa_hat,
    }
}

/// Diagnostics from the root-free quadratic forms alone; the vec terms are
/// empty, which is enough for autocovariances and no-estimation statistics.
pub fn diagnostics_from_s(s_hat: DVector<f64>) -> DiagnosticSeries {
    let n = s_hat.len();
    let kappa_hat = s_hat.iter().map(|v| v * v).sum::<f64>() / n as f64;
    DiagnosticSeries {
        s_hat,
        s_vecs: DMatrix::zeros(0, 0),
        kappa_hat,
    }
}

/// Autocovariances r_1..r_m of S_t and the autocorrelations r_h / r_0
/// (r_0 runs over all t and equals kappa).
pub fn autocov_sum_sq(diag: &DiagnosticSeries, m: usize) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = diag.s_hat.len();
    if m == 0 || m >= n {
        return Err(Error::LagTooLarge { m, n });
    }
    let mut r = DVector::zeros(m);
    for h in 1..=m {
        let mut acc = 0.0;
        for t in h..n {
            acc += diag.s_hat[t] * diag.s_hat[t - h];
        }
        r[h - 1] = acc / n as f64;
    }
    let r0 = diag.kappa_hat;
    let rho = r.map(|v| v / r0);
    Ok((r, rho))
}

/// Estimator variant for the asymptotic covariance of sqrt(n) r_m.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DMethod {
    /// The full expression with the empirical Sigma term.
    General,
    /// The symmetric-innovation simplification
    /// d^2 (k4-1)^2 I_m + C (J^-1 I J^-1 - 2 (k4-1) J^-1) C'.
    LingLiSimplified,
}

#[derive(Debug, Clone)]
pub struct CovarianceAssembly {
    pub method: DMethod,
    pub m: usize,
    /// m x s0 matrix of -(1/n) sum S_{t-h} Tr(H^-1 dH/dtheta_i).
    pub c_m: DMatrix<f64>,
    /// s0 x m empirical Sigma (General method; zero matrix otherwise).
    pub sigma: DMatrix<f64>,
    pub d_hat: DMatrix<f64>,
    pub d_rho_hat: DMatrix<f64>,
    pub kappa_hat: f64,
    /// Condition number of d_hat after symmetrization.
    pub condition: f64,
    /// Largest relative asymmetry of d_hat before symmetrization.
    pub asymmetry: f64,
}

fn a9_advisory(d: usize, mode: crate::model::PowerMode) -> String {
    match mode {
        crate::model::PowerMode::KnownDelta => format!(
            "the innovation distribution must put mass on more than {} positive and negative values",
            3 * (d + 1)
        ),
        crate::model::PowerMode::EstimatedDelta => format!(
            "the innovation distribution must put mass on more than {} positive and negative values",
            11 * d + 1
        ),
    }
}

/// Assembles D (and its autocorrelation version) at lag span m.
pub fn assemble_d(
    order: &ModelOrder,
    fit: &FitResult,
    path: &VolatilityPath,
    derivs: &DerivStack,
    diag: &DiagnosticSeries,
    m: usize,
    method: DMethod,
) -> Result<CovarianceAssembly> {
    let n = diag.s_hat.len();
    if m == 0 || m >= n {
        return Err(Error::LagTooLarge { m, n });
    }
    let s0 = derivs.coord_count();
    let d = order.d;
    let nf = n as f64;

    // per-observation traces Tr(H^-1 dH_i) and, for the Sigma term,
    // phi_t(i) = vec(H^-1/2 dH_i H^-1/2)' vec(eta eta' - I)
    let mut traces = DMatrix::zeros(n, s0);
    let mut phi = DMatrix::zeros(n, s0);
    let need_phi = method == DMethod::General;
    for t in 0..n {
        let h_inv = path.h_inv(t);
        let ops = if need_phi { Some(path.h_ops(t)?) } else { None };
        for k in 0..s0 {
            let dh = derivs.dh_matrix(path, t, k);
            let mut tr = 0.0;
            for a in 0..d {
                for b in 0..d {
                    tr += h_inv[(a, b)] * dh[(b, a)];
                }
            }
            traces[(t, k)] = tr;
            if let Some(ops) = &ops {
                let g = &ops.inv_sqrt * &dh * &ops.inv_sqrt;
                let mut acc = 0.0;
                for b in 0..d {
                    for a in 0..d {
                        acc += g[(a, b)] * diag.s_vecs[(t, b * d + a)];
                    }
                }
                phi[(t, k)] = acc;
            }
        }
    }

    let mut c_m = DMatrix::zeros(m, s0);
    for h in 1..=m {
        for t in h..n {
            let w = diag.s_hat[t - h];
            for k in 0..s0 {
                c_m[(h - 1, k)] -= w * traces[(t, k)];
            }
        }
    }
    c_m /= nf;

    let j_inv = fit.j_hat.clone().try_inverse().ok_or(Error::SingularJ {
        cond: f64::INFINITY,
    })?;
    let omega_sandwich = &j_inv * &fit.i_hat * &j_inv;

    let kappa = diag.kappa_hat;
    let (d_raw, sigma) = match method {
        DMethod::General => {
            // Sigma column h sums J^-1 phi_t S_t S_{t-h} over t > h
            let mut sigma_raw = DMatrix::zeros(s0, m);
            for h in 1..=m {
                for t in h..n {
                    let w = diag.s_hat[t] * diag.s_hat[t - h];
                    for k in 0..s0 {
                        sigma_raw[(k, h - 1)] += phi[(t, k)] * w;
                    }
                }
            }
            sigma_raw /= nf;
            let sigma = &j_inv * sigma_raw;
            let core = &c_m * &omega_sandwich * c_m.transpose();
            let cross = &c_m * &sigma;
            let d_raw =
                DMatrix::identity(m, m) * (kappa * kappa) + core + &cross + cross.transpose();
            (d_raw, sigma)
        }
        DMethod::LingLiSimplified => {
            // pooled fourth moment of the residual components
            let mut k4 = 0.0;
            for t in 0..n {
                for i in 0..d {
                    k4 += fit.residuals[(t, i)].powi(4);
                }
            }
            k4 /= nf * d as f64;
            let lead = (d as f64) * (d as f64) * (k4 - 1.0) * (k4 - 1.0);
            let mid = &omega_sandwich - 2.0 * (k4 - 1.0) * &j_inv;
            let d_raw = DMatrix::identity(m, m) * lead + &c_m * mid * c_m.transpose();
            (d_raw, DMatrix::zeros(s0, m))
        }
    };

    let mut asymmetry = 0.0f64;
    let scale = d_raw
        .iter()
        .fold(0.0f64, |a, &v| a.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for a in 0..m {
        for b in 0..a {
            asymmetry = asymmetry.max((d_raw[(a, b)] - d_raw[(b, a)]).abs() / scale);
        }
    }
    let d_hat = 0.5 * (&d_raw + d_raw.transpose());
    let condition = crate::linalg::sym_condition_number(&d_hat);
    if !condition.is_finite() || condition > 1e12 {
        return Err(Error::SingularD {
            cond: condition,
            advisory: a9_advisory(d, order.power_mode),
        });
    }
    // the autocorrelation statistic divides by r_0 = kappa, so its covariance
    // is D / kappa^2 (method-consistent denominator for the simplified form)
    let denom = match method {
        DMethod::General => kappa * kappa,
        DMethod::LingLiSimplified => {
            let mut k4 = 0.0;
            for t in 0..n {
                for i in 0..d {
                    k4 += fit.residuals[(t, i)].powi(4);
                }
            }
            k4 /= nf * d as f64;
            ((d as f64) * (k4 - 1.0)).powi(2)
        }
    };
    let d_rho_hat = &d_hat / denom;

    Ok(CovarianceAssembly {
        method,
        m,
        c_m,
        sigma,
        d_hat,
        d_rho_hat,
        kappa_hat: kappa,
        condition,
        asymmetry,
    })
}

/// One adequacy test at lag span m.
#[derive(Debug, Clone)]
pub struct TestReport {
    pub m: usize,
    pub r_hat: Vec<f64>,
    pub rho_hat: Vec<f64>,
    pub stat_r: f64,
    pub stat_rho: f64,
    pub pvalue_r: f64,
    pub pvalue_rho: f64,
    /// Half-widths of the per-lag confidence band for rho(h).
    pub bands: Vec<f64>,
    pub alpha: f64,
}

impl TestReport {
    pub fn reject(&self, alpha: f64) -> bool {
        self.pvalue_r < alpha
    }
}

fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = m.nrows();
    let sym = SymMatrix::from_symmetric_unchecked(m.clone());
    let eig = SymmetricEigen::new(sym.into_matrix());
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let min = eig.eigenvalues.min();
    if !(min > 0.0) || max / min > 1e12 {
        return Err(Error::SingularD {
            cond: if min > 0.0 { max / min } else { f64::INFINITY },
            advisory: "covariance not positive definite".into(),
        });
    }
    let mut inv = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        let vk = eig.eigenvectors.column(k);
        let w = 1.0 / eig.eigenvalues[k];
        for a in 0..dim {
            for b in 0..dim {
                inv[(a, b)] += w * vk[a] * vk[b];
            }
        }
    }
    Ok(inv)
}

/// Quadratic-form statistics and p-values at lag span `m <= assembly.m`,
/// using the top-left block of the assembled covariance.
pub fn portmanteau_test(
    assembly: &CovarianceAssembly,
    r_hat: &DVector<f64>,
    rho_hat: &DVector<f64>,
    n: usize,
    m: usize,
    alpha: f64,
) -> Result<TestReport> {
    if m == 0 || m > assembly.m || m > r_hat.len() {
        return Err(Error::LagTooLarge { m, n });
    }
    let d_block = assembly.d_hat.view((0, 0), (m, m)).into_owned();
    let d_rho_block = assembly.d_rho_hat.view((0, 0), (m, m)).into_owned();
    let r = r_hat.rows(0, m).into_owned();
    let rho = rho_hat.rows(0, m).into_owned();
    let nf = n as f64;

    let d_inv = spd_inverse(&d_block)?;
    let stat_r = (nf * r.dot(&(&d_inv * &r))).max(0.0);
    let d_rho_inv = spd_inverse(&d_rho_block)?;
    let stat_rho = (nf * rho.dot(&(&d_rho_inv * &rho))).max(0.0);

    let u = normal_quantile(1.0 - alpha)?;
    let bands = (0..m)
        .map(|h| u * d_rho_block[(h, h)].sqrt() / nf.sqrt())
        .collect();

    Ok(TestReport {
        m,
        r_hat: r.iter().copied().collect(),
        rho_hat: rho.iter().copied().collect(),
        stat_r,
        stat_rho,
        pvalue_r: chi2_sf(stat_r, m)?,
        pvalue_rho: chi2_sf(stat_rho, m)?,
        bands,
        alpha,
    })
}

/// Full diagnostic pipeline at a fitted parameter: recomputes the filter and
/// derivative stack, assembles D once at `m_max` and reports every lag span.
pub fn adequacy_tests(
    order: &ModelOrder,
    fit: &FitResult,
    series: &Series,
    init: &InitPolicy,
    m_max: usize,
    alpha: f64,
    method: DMethod,
) -> Result<Vec<TestReport>> {
    let path = volatility_filter(order, &fit.params_hat, series, init)?;
    let derivs = volatility_derivatives(order, &fit.params_hat, series, &path, init)?;
    let diag = residual_diagnostics(fit, order.d);
    let assembly = assemble_d(order, fit, &path, &derivs, &diag, m_max, method)?;
    let (r_hat, rho_hat) = autocov_sum_sq(&diag, m_max)?;
    (1..=m_max)
        .map(|m| portmanteau_test(&assembly, &r_hat, &rho_hat, series.n(), m, alpha))
        .collect()
}

#[cfg(test)]
mod tests;
