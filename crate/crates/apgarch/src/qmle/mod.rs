//! Gaussian quasi-maximum-likelihood estimation.
//!
//! The criterion is the mean of l_t = eps_t' H_t^{-1} eps_t + log det H_t;
//! minimization runs in an unconstrained reparameterized space with analytic
//! gradients from the volatility derivative recursion. The empirical
//! information matrices I (outer product of scores) and J (expected-Hessian
//! form) give the sandwich variance J^{-1} I J^{-1} / n.

mod bfgs;
mod reparam;

pub use reparam::{Reparam, EPS_FLOOR};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::sym_condition_number;
use crate::model::{
    volatility_derivatives, volatility_filter, DerivStack, InitPolicy, ModelOrder, Params,
    PowerMode, Series, VolatilityPath,
};

/// Starting point for the optimizer.
#[derive(Debug, Clone)]
pub enum InitSpec {
    /// Moment-based starting values: omega from the sample variance, small
    /// diagonal-dominant A/B blocks, sample correlation for rho, delta = 2.
    Auto,
    Explicit(Params),
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub init: InitSpec,
    /// The delta vector held fixed in KnownDelta mode (required with Auto init).
    pub fixed_delta: Option<DVector<f64>>,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Box for delta in EstimatedDelta mode.
    pub delta_bounds: (f64, f64),
    pub init_policy: InitPolicy,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            init: InitSpec::Auto,
            fixed_delta: None,
            max_iters: 500,
            grad_tol: 1e-6,
            delta_bounds: (0.1, 8.0),
            init_policy: InitPolicy::OmegaStart,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub order: ModelOrder,
    pub params_hat: Params,
    /// -(1/(2n)) sum_t l_t at the optimum (comparable across models; the
    /// Gaussian constant -(d/2) log 2pi is excluded).
    pub loglik_mean: f64,
    pub i_hat: DMatrix<f64>,
    pub j_hat: DMatrix<f64>,
    /// Sandwich J^{-1} I J^{-1} / n, symmetrized.
    pub vcov: DMatrix<f64>,
    /// n x d matrix of residuals eta_t = H_t^{-1/2} eps_t (symmetric root).
    pub residuals: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub grad_max: f64,
    pub n_used: usize,
    pub init_policy: InitPolicy,
}

/// Mean quasi-likelihood and its per-observation terms.
pub fn quasi_loglik(
    order: &ModelOrder,
    params: &Params,
    series: &Series,
    init: &InitPolicy,
) -> Result<(f64, Vec<f64>)> {
    let path = volatility_filter(order, params, series, init)?;
    let per_t: Vec<f64> = (0..series.n())
        .map(|t| path.quad_form(t, series) + path.logdet_h(t))
        .collect();
    let total = per_t.iter().sum::<f64>() / series.n() as f64;
    Ok((total, per_t))
}

/// Fills `out` with the score of l_t at time t:
/// d l_t / d theta_k = Tr[(H^{-1} - H^{-1} eps eps' H^{-1}) dH/dtheta_k].
fn score_row(
    path: &VolatilityPath,
    derivs: &DerivStack,
    series: &Series,
    t: usize,
    out: &mut [f64],
) {
    let d = path.dim();
    let s0 = derivs.coord_count();
    debug_assert_eq!(out.len(), s0);
    // u = H^{-1} eps, M = H^{-1} - u u'
    let mut z = vec![0.0f64; d];
    for i in 0..d {
        z[i] = series.value(t, i) / path.sqrt_h[(t, i)];
    }
    let mut u = vec![0.0f64; d];
    for i in 0..d {
        let mut acc = 0.0;
        for j in 0..d {
            acc += path.r_ops.inv[(i, j)] * z[j];
        }
        u[i] = acc / path.sqrt_h[(t, i)];
    }
    let m_at = |a: usize, b: usize| {
        path.r_ops.inv[(a, b)] / (path.sqrt_h[(t, a)] * path.sqrt_h[(t, b)]) - u[a] * u[b]
    };
    // w = (M o R) sqrt_h so that Tr(M dH_k) = 2 sum_a dsqrt_a(k) w_a
    let mut w = vec![0.0f64; d];
    for a in 0..d {
        let mut acc = 0.0;
        for b in 0..d {
            acc += m_at(a, b) * path.r[(a, b)] * path.sqrt_h[(t, b)];
        }
        w[a] = acc;
    }
    for k in 0..s0 {
        out[k] = if let Some((r, c)) = derivs.rho_pair(k) {
            2.0 * m_at(r, c) * path.sqrt_h[(t, r)] * path.sqrt_h[(t, c)]
        } else {
            let mut acc = 0.0;
            for a in 0..d {
                acc += derivs.dsqrt(t, k, a) * w[a];
            }
            2.0 * acc
        };
    }
}

/// Per-observation score vectors d l_t / d theta.
pub fn score(
    order: &ModelOrder,
    _params: &Params,
    series: &Series,
    path: &VolatilityPath,
    derivs: &DerivStack,
) -> Result<Vec<DVector<f64>>> {
    check_consistency(order, path, derivs)?;
    let s0 = derivs.coord_count();
    let mut buf = vec![0.0f64; s0];
    let mut rows = Vec::with_capacity(series.n());
    for t in 0..series.n() {
        score_row(path, derivs, series, t, &mut buf);
        rows.push(DVector::from_column_slice(&buf));
    }
    Ok(rows)
}

fn check_consistency(order: &ModelOrder, path: &VolatilityPath, derivs: &DerivStack) -> Result<()> {
    if derivs.coord_count() != order.param_count() || derivs.power_mode() != order.power_mode {
        return Err(Error::ModeMismatch);
    }
    if derivs.n() != path.len() {
        return Err(Error::DimensionMismatch(
            "derivative stack does not match path".into(),
        ));
    }
    Ok(())
}

/// Empirical information matrices and the sandwich variance at a fitted point.
pub fn information_matrices(
    order: &ModelOrder,
    _params: &Params,
    series: &Series,
    path: &VolatilityPath,
    derivs: &DerivStack,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    check_consistency(order, path, derivs)?;
    let n = series.n();
    let s0 = derivs.coord_count();
    let d = order.d;
    let mut i_hat = DMatrix::zeros(s0, s0);
    let mut j_hat = DMatrix::zeros(s0, s0);
    let mut sc = vec![0.0f64; s0];
    let mut p_mats: Vec<DMatrix<f64>> = vec![DMatrix::zeros(d, d); s0];
    for t in 0..n {
        score_row(path, derivs, series, t, &mut sc);
        for i in 0..s0 {
            for j in 0..=i {
                i_hat[(i, j)] += sc[i] * sc[j];
            }
        }
        let h_inv = path.h_inv(t);
        for (k, pk) in p_mats.iter_mut().enumerate() {
            let dh = derivs.dh_matrix(path, t, k);
            h_inv.mul_to(&dh, pk);
        }
        for i in 0..s0 {
            for j in 0..=i {
                let mut tr = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        tr += p_mats[j][(a, b)] * p_mats[i][(b, a)];
                    }
                }
                j_hat[(i, j)] += tr;
            }
        }
    }
    let nf = n as f64;
    for i in 0..s0 {
        for j in 0..=i {
            i_hat[(i, j)] /= nf;
            i_hat[(j, i)] = i_hat[(i, j)];
            j_hat[(i, j)] /= nf;
            j_hat[(j, i)] = j_hat[(i, j)];
        }
    }
    let cond = sym_condition_number(&j_hat);
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::SingularJ { cond });
    }
    let j_inv = j_hat.clone().try_inverse().ok_or(Error::SingularJ {
        cond: f64::INFINITY,
    })?;
    let vcov = &j_inv * &i_hat * &j_inv / nf;
    let vcov = 0.5 * (&vcov + vcov.transpose());
    Ok((i_hat, j_hat, vcov))
}

/// Mean objective and its gradient in one pass; used by the optimizer.
pub(crate) fn objective_and_gradient(
    order: &ModelOrder,
    params: &Params,
    series: &Series,
    init: &InitPolicy,
) -> Result<(f64, DVector<f64>)> {
    let path = volatility_filter(order, params, series, init)?;
    let derivs = volatility_derivatives(order, params, series, &path, init)?;
    let n = series.n();
    let s0 = order.param_count();
    let mut total = 0.0;
    let mut grad = DVector::zeros(s0);
    let mut sc = vec![0.0f64; s0];
    for t in 0..n {
        total += path.quad_form(t, series) + path.logdet_h(t);
        score_row(&path, &derivs, series, t, &mut sc);
        for k in 0..s0 {
            grad[k] += sc[k];
        }
    }
    Ok((total / n as f64, grad / n as f64))
}

/// Moment-based starting values.
fn auto_init(order: &ModelOrder, series: &Series, config: &FitConfig) -> Result<Params> {
    let d = order.d;
    let n = series.n() as f64;
    let mut mean = vec![0.0f64; d];
    for t in 0..series.n() {
        for i in 0..d {
            mean[i] += series.value(t, i);
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut cov = DMatrix::zeros(d, d);
    for t in 0..series.n() {
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] += (series.value(t, a) - mean[a]) * (series.value(t, b) - mean[b]);
            }
        }
    }
    cov /= n;
    let omega = DVector::from_fn(d, |i, _| (0.7 * cov[(i, i)]).max(1e-6));
    // off-diagonals start at a small positive value: a hard zero sits at the
    // reparameterization floor where its gradient vanishes
    let a_start = DMatrix::from_fn(d, d, |r, c| if r == c { 0.05 } else { 0.02 });
    let b_start =
        |p: usize| DMatrix::from_fn(d, d, |r, c| if r == c { 0.85 / p as f64 } else { 0.02 });
    let rho = DVector::from_fn(order.rho_count(), |k, _| {
        let (r, c) = crate::model::lower_triangle_pairs(d)[k];
        let denom = (cov[(r, r)] * cov[(c, c)]).sqrt();
        if denom > 0.0 {
            (cov[(r, c)] / denom).clamp(-0.98, 0.98)
        } else {
            0.0
        }
    });
    let delta = match order.power_mode {
        PowerMode::KnownDelta => config.fixed_delta.clone().ok_or_else(|| {
            Error::Config("KnownDelta fit with Auto init needs fixed_delta".into())
        })?,
        PowerMode::EstimatedDelta => {
            let (lo, hi) = config.delta_bounds;
            DVector::from_element(d, 2.0f64.clamp(lo + 1e-3, hi - 1e-3))
        }
    };
    Ok(Params {
        omega,
        a_plus: vec![a_start.clone(); order.q],
        a_minus: vec![a_start; order.q],
        b: (0..order.p).map(|_| b_start(order.p)).collect(),
        rho,
        delta,
    })
}

/// Quasi-maximum-likelihood fit. Deterministic given (series, config).
pub fn fit(order: &ModelOrder, series: &Series, config: &FitConfig) -> Result<FitResult> {
    if !(config.grad_tol > 0.0) {
        return Err(Error::Config("grad_tol must be positive".into()));
    }
    let (lo, hi) = config.delta_bounds;
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::Config(format!(
            "delta bounds ({lo}, {hi}) need 0 < lo < hi"
        )));
    }
    let n = series.n();
    if n <= order.max_lag() + 1 {
        return Err(Error::Config(format!(
            "series of length {n} too short for order (p={}, q={})",
            order.p, order.q
        )));
    }
    if series.dim() != order.d {
        return Err(Error::DimensionMismatch(
            "series dimension != model dimension".into(),
        ));
    }
    let init_params = match &config.init {
        InitSpec::Auto => auto_init(order, series, config)?,
        InitSpec::Explicit(p) => {
            let mut p = p.clone();
            if order.power_mode == PowerMode::KnownDelta {
                if let Some(fixed) = &config.fixed_delta {
                    p.delta = fixed.clone();
                }
            } else {
                let (lo, hi) = config.delta_bounds;
                p.delta = p.delta.map(|v| v.clamp(lo + 1e-9, hi - 1e-9));
            }
            p
        }
    };
    // also catches a bad fixed_delta handed to the Auto path
    let init_params = crate::model::validate_params(order, init_params)?;

    let rp = Reparam::new(*order, config.delta_bounds);
    let template = init_params.clone();
    let theta0 = init_params.to_vector(order);
    let u0 = rp.to_unconstrained(&theta0);

    // fail fast when the starting point itself is inadmissible
    objective_and_gradient(order, &init_params, series, &config.init_policy)?;

    let eval = |u: &DVector<f64>| -> Option<(f64, DVector<f64>)> {
        let theta = rp.to_constrained(u);
        let params = Params::from_vector(order, &theta, &template);
        match objective_and_gradient(order, &params, series, &config.init_policy) {
            Ok((f, grad_theta)) => {
                if !f.is_finite() {
                    return None;
                }
                let jac = rp.jacobian_diag(&theta);
                let grad_u = DVector::from_fn(u.len(), |k, _| grad_theta[k] * jac[k]);
                Some((f, grad_u))
            }
            Err(_) => None,
        }
    };

    let outcome = bfgs::minimize(eval, u0, config.max_iters, config.grad_tol)
        .expect("initial point was checked admissible");
    debug_assert!(outcome.f.is_finite());

    let theta_hat = rp.to_constrained(&outcome.x);
    let mut params_hat = Params::from_vector(order, &theta_hat, &template);
    // the shifted-log map can leave coefficients a hair below zero; snap them
    for block in params_hat
        .a_plus
        .iter_mut()
        .chain(params_hat.a_minus.iter_mut())
        .chain(params_hat.b.iter_mut())
    {
        for v in block.iter_mut() {
            if *v < 0.0 && *v > -2.0 * EPS_FLOOR {
                *v = 0.0;
            }
        }
    }

    if !outcome.converged {
        return Err(Error::NotConverged {
            iterations: outcome.iterations,
            grad_norm: outcome.grad.amax(),
            last_iterate: Box::new(params_hat),
        });
    }

    let mut result = evaluate_at(order, &params_hat, series, &config.init_policy)?;
    result.iterations = outcome.iterations;
    result.grad_max = outcome.grad.amax();
    Ok(result)
}

/// Builds the full fit-state (information matrices, sandwich variance,
/// residuals, mean log-likelihood) at a fixed parameter point. `fit` calls
/// this at its optimum; diagnostics on previously stored estimates use it
/// directly.
pub fn evaluate_at(
    order: &ModelOrder,
    params: &Params,
    series: &Series,
    init: &InitPolicy,
) -> Result<FitResult> {
    let n = series.n();
    let path = volatility_filter(order, params, series, init)?;
    let derivs = volatility_derivatives(order, params, series, &path, init)?;
    let (i_hat, j_hat, vcov) = information_matrices(order, params, series, &path, &derivs)?;
    let (total, _) = quasi_loglik(order, params, series, init)?;

    let d = order.d;
    let mut residuals = DMatrix::zeros(n, d);
    for t in 0..n {
        let ops = path.h_ops(t)?;
        for a in 0..d {
            let mut acc = 0.0;
            for b in 0..d {
                acc += ops.inv_sqrt[(a, b)] * series.value(t, b);
            }
            residuals[(t, a)] = acc;
        }
    }

    Ok(FitResult {
        order: *order,
        params_hat: params.clone(),
        loglik_mean: -0.5 * total,
        i_hat,
        j_hat,
        vcov,
        residuals,
        converged: true,
        iterations: 0,
        grad_max: f64::NAN,
        n_used: n,
        init_policy: init.clone(),
    })
}
