//! Top Lyapunov exponent of the random companion-matrix products.
//!
//! Strict stationarity of the recursion requires gamma < 0, where gamma is the
//! growth rate of ||C_T ... C_1|| for the (p+2q)d-dimensional companion
//! matrices C_t driven by fresh correlated shocks. The estimate multiplies
//! random companion matrices with periodic renormalization and averages the
//! accumulated log-norms.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::RngStream;

use super::params::{ModelOrder, Params};

const RENORM_PERIOD: usize = 10;

#[derive(Debug, Clone, Copy)]
pub struct LyapunovEstimate {
    pub gamma_hat: f64,
    pub n_products: usize,
    /// Monte Carlo standard error from the per-block growth rates.
    pub std_err: f64,
}

impl LyapunovEstimate {
    pub fn is_stationary(&self) -> bool {
        self.gamma_hat < 0.0
    }
}

pub fn lyapunov_exponent(
    order: &ModelOrder,
    params: &Params,
    stream: RngStream,
    n_products: usize,
) -> Result<LyapunovEstimate> {
    lyapunov_exponent_with_period(order, params, stream, n_products, RENORM_PERIOD)
}

/// Same estimate with an explicit renormalization period (any submultiplicative
/// norm and period give the same limit).
pub fn lyapunov_exponent_with_period(
    order: &ModelOrder,
    params: &Params,
    stream: RngStream,
    n_products: usize,
    period: usize,
) -> Result<LyapunovEstimate> {
    if order.p + order.q == 0 {
        return Err(Error::DegenerateOrder);
    }
    if n_products == 0 || period == 0 {
        return Err(Error::Config("need n_products >= 1 and period >= 1".into()));
    }
    let d = order.d;
    let k = (order.p + 2 * order.q) * d;
    let r_sqrt = params.correlation_ops(d)?.sqrt;
    let mut rng = stream.rng();

    let mut prod = DMatrix::<f64>::identity(k, k);
    let mut block_rates: Vec<f64> = Vec::with_capacity(n_products / period + 1);
    let mut acc_log = 0.0f64;
    let mut since_renorm = 0usize;

    for _ in 0..n_products {
        let eta = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let eta_bar = &r_sqrt * eta;
        let c = companion_matrix(order, params, &eta_bar);
        prod = &c * &prod;
        since_renorm += 1;
        if since_renorm == period {
            let norm = prod.norm();
            if norm == 0.0 {
                // products vanished: the exponent is -infinity
                return Ok(LyapunovEstimate {
                    gamma_hat: f64::NEG_INFINITY,
                    n_products,
                    std_err: 0.0,
                });
            }
            acc_log += norm.ln();
            block_rates.push(norm.ln() / period as f64);
            prod /= norm;
            since_renorm = 0;
        }
    }
    if since_renorm > 0 {
        let norm = prod.norm();
        if norm == 0.0 {
            return Ok(LyapunovEstimate {
                gamma_hat: f64::NEG_INFINITY,
                n_products,
                std_err: 0.0,
            });
        }
        acc_log += norm.ln();
    }
    let gamma_hat = acc_log / n_products as f64;
    let std_err = if block_rates.len() > 1 {
        let m = block_rates.iter().sum::<f64>() / block_rates.len() as f64;
        let var = block_rates.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
            / (block_rates.len() - 1) as f64;
        (var / block_rates.len() as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(LyapunovEstimate {
        gamma_hat,
        n_products,
        std_err,
    })
}

/// Assembles the companion matrix for one draw of correlated shocks.
///
/// State order: q blocks of powered positive shock parts, q blocks of powered
/// negative parts, p blocks of lagged h^{delta/2}. The top block of each
/// section maps the previous state through (Upsilon^{+/-} A/B); the remaining
/// rows shift the lag registers.
fn companion_matrix(order: &ModelOrder, params: &Params, eta_bar: &DVector<f64>) -> DMatrix<f64> {
    let d = order.d;
    let (p, q) = (order.p, order.q);
    let k = (p + 2 * q) * d;
    let ups_pos = DVector::from_fn(d, |i, _| {
        let e = eta_bar[i];
        if e > 0.0 {
            e.powf(params.delta[i])
        } else {
            0.0
        }
    });
    let ups_neg = DVector::from_fn(d, |i, _| {
        let e = eta_bar[i];
        if e < 0.0 {
            (-e).powf(params.delta[i])
        } else {
            0.0
        }
    });

    let mut c = DMatrix::zeros(k, k);
    if q > 0 {
        fill_recursion_row(&mut c, order, params, 0, Some(&ups_pos));
        fill_recursion_row(&mut c, order, params, q * d, Some(&ups_neg));
        // shift registers for the positive and negative lag stacks
        for i in 0..(q - 1) * d {
            c[(d + i, i)] = 1.0;
            c[(q * d + d + i, q * d + i)] = 1.0;
        }
    }
    if p > 0 {
        fill_recursion_row(&mut c, order, params, 2 * q * d, None);
        for i in 0..(p - 1) * d {
            c[(2 * q * d + d + i, 2 * q * d + i)] = 1.0;
        }
    }
    c
}

/// Writes Upsilon * [A+_{1:q} | A-_{1:q} | B_{1:p}] into the block row at `row0`
/// (identity weights when no Upsilon is supplied).
fn fill_recursion_row(
    c: &mut DMatrix<f64>,
    order: &ModelOrder,
    params: &Params,
    row0: usize,
    ups: Option<&DVector<f64>>,
) {
    let d = order.d;
    let (p, q) = (order.p, order.q);
    for l in 0..q {
        for r in 0..d {
            let w = ups.map_or(1.0, |u| u[r]);
            for cc in 0..d {
                c[(row0 + r, l * d + cc)] = w * params.a_plus[l][(r, cc)];
                c[(row0 + r, (l + q) * d + cc)] = w * params.a_minus[l][(r, cc)];
            }
        }
    }
    for j in 0..p {
        for r in 0..d {
            let w = ups.map_or(1.0, |u| u[r]);
            for cc in 0..d {
                c[(row0 + r, 2 * q * d + j * d + cc)] = w * params.b[j][(r, cc)];
            }
        }
    }
}
