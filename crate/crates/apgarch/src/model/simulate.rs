//! Path simulation with Gaussian innovations.
//!
//! Draws eta_t iid N(0, I_d) and forms eps_t = D_t (R^{1/2} eta_t), the
//! correlated-shock form of the model, advancing the volatility recursion
//! seeded at h^{delta/2} = omega with zero pre-sample shocks.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::RngStream;

use super::params::{ModelOrder, Params};
use super::series::Series;

const H_POW_CEIL: f64 = 1e300;

pub fn simulate(
    order: &ModelOrder,
    params: &Params,
    n: usize,
    burn_in: usize,
    stream: RngStream,
) -> Result<Series> {
    let d = order.d;
    let r_ops = params.correlation_ops(d)?;
    let r_sqrt = r_ops.sqrt;
    let delta = &params.delta;
    let mut rng = stream.rng();

    let total = burn_in + n;
    // ring buffers of past powered shocks (q lags) and past g (p lags)
    let mut past_pos: Vec<DVector<f64>> = vec![DVector::zeros(d); order.q];
    let mut past_neg: Vec<DVector<f64>> = vec![DVector::zeros(d); order.q];
    let mut past_g: Vec<DVector<f64>> = vec![params.omega.clone(); order.p];

    let mut out = DMatrix::zeros(n, d);
    for t in 0..total {
        let mut g = params.omega.clone();
        for l in 0..order.q {
            g += &params.a_plus[l] * &past_pos[l] + &params.a_minus[l] * &past_neg[l];
        }
        for j in 0..order.p {
            g += &params.b[j] * &past_g[j];
        }
        let mut eps = DVector::zeros(d);
        let mut pos = DVector::zeros(d);
        let mut neg = DVector::zeros(d);
        let eta = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let eta_bar = &r_sqrt * eta;
        for i in 0..d {
            if !(g[i] > 0.0 && g[i] <= H_POW_CEIL) {
                return Err(Error::NumericOverflow { t });
            }
            let h = g[i].powf(2.0 / delta[i]);
            if !h.is_finite() {
                return Err(Error::NumericOverflow { t });
            }
            let e = h.sqrt() * eta_bar[i];
            eps[i] = e;
            if e > 0.0 {
                pos[i] = e.powf(delta[i]);
            } else if e < 0.0 {
                neg[i] = (-e).powf(delta[i]);
            }
        }
        if t >= burn_in {
            for i in 0..d {
                out[(t - burn_in, i)] = eps[i];
            }
        }
        if order.q > 0 {
            past_pos.rotate_right(1);
            past_pos[0] = pos;
            past_neg.rotate_right(1);
            past_neg[0] = neg;
        }
        if order.p > 0 {
            past_g.rotate_right(1);
            past_g[0] = g;
        }
    }
    Series::new(out)
}
