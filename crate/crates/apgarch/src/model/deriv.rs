//! Analytic derivatives of the volatility recursion.
//!
//! For every coordinate of the parameter vector the stack holds
//! d h^{delta/2} / d theta and d sqrt(h) / d theta per time step; from those
//! dH_t = dD R D + D R dD (volatility and power coordinates) or
//! dH_t = D (dR/drho_ij) D (correlation coordinates) is assembled on demand.
//!
//! The g-derivative obeys the same linear recursion as g itself,
//!   dg_t = c_t + sum_j B_j dg_{t-j},
//! where c_t places a 1 in the omega slot, powered shocks in the A slots and
//! lagged g in the B slots. Power-coordinate entries add the logarithmic terms
//! log(eps^+/-) (eps^+/-)^delta, taken as 0 when the shock part vanishes.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::filter::{InitPolicy, VolatilityPath};
use super::params::{lower_triangle_pairs, ModelOrder, Params, PowerMode};
use super::series::Series;

#[derive(Debug, Clone)]
pub struct DerivStack {
    n: usize,
    d: usize,
    s0: usize,
    power_mode: PowerMode,
    /// Strict lower-triangle pairs addressed by the rho block.
    rho_pairs: Vec<(usize, usize)>,
    rho_offset: usize,
    /// d g_{i,t} / d theta_k, layout [t][k][i].
    dg: Vec<f64>,
    /// d sqrt(h_{i,t}) / d theta_k, layout [t][k][i].
    dsqrt: Vec<f64>,
}

impl DerivStack {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coord_count(&self) -> usize {
        self.s0
    }

    pub fn power_mode(&self) -> PowerMode {
        self.power_mode
    }

    #[inline]
    fn idx(&self, t: usize, k: usize, i: usize) -> usize {
        (t * self.s0 + k) * self.d + i
    }

    /// d h^{delta/2}_{i,t} / d theta_k.
    pub fn dg(&self, t: usize, k: usize, i: usize) -> f64 {
        self.dg[self.idx(t, k, i)]
    }

    /// d sqrt(h_{i,t}) / d theta_k.
    pub fn dsqrt(&self, t: usize, k: usize, i: usize) -> f64 {
        self.dsqrt[self.idx(t, k, i)]
    }

    /// d h_{i,t} / d theta_k = 2 sqrt(h) * dsqrt.
    pub fn dh(&self, path: &VolatilityPath, t: usize, k: usize, i: usize) -> f64 {
        2.0 * path.sqrt_h[(t, i)] * self.dsqrt(t, k, i)
    }

    /// Whether coordinate k addresses the correlation block; returns the pair.
    pub fn rho_pair(&self, k: usize) -> Option<(usize, usize)> {
        if k >= self.rho_offset && k < self.rho_offset + self.rho_pairs.len() {
            Some(self.rho_pairs[k - self.rho_offset])
        } else {
            None
        }
    }

    /// All-zero stack (every dH vanishes), for isolating the
    /// estimation-noise-free reduction in tests.
    #[cfg(test)]
    pub(crate) fn zeroed(order: &ModelOrder, n: usize) -> DerivStack {
        let s0 = order.param_count();
        DerivStack {
            n,
            d: order.d,
            s0,
            power_mode: order.power_mode,
            rho_pairs: vec![],
            rho_offset: s0,
            dg: vec![0.0; n * s0 * order.d],
            dsqrt: vec![0.0; n * s0 * order.d],
        }
    }

    /// Dense dH_t/dtheta_k.
    pub fn dh_matrix(&self, path: &VolatilityPath, t: usize, k: usize) -> DMatrix<f64> {
        let d = self.d;
        if let Some((r, c)) = self.rho_pair(k) {
            let mut m = DMatrix::zeros(d, d);
            let v = path.sqrt_h[(t, r)] * path.sqrt_h[(t, c)];
            m[(r, c)] = v;
            m[(c, r)] = v;
            return m;
        }
        DMatrix::from_fn(d, d, |a, b| {
            path.r[(a, b)]
                * (self.dsqrt(t, k, a) * path.sqrt_h[(t, b)]
                    + path.sqrt_h[(t, a)] * self.dsqrt(t, k, b))
        })
    }
}

/// Builds the derivative stack for the same (params, series, init) the path
/// came from. The stack covers every coordinate of the current power mode.
pub fn volatility_derivatives(
    order: &ModelOrder,
    params: &Params,
    series: &Series,
    path: &VolatilityPath,
    init: &InitPolicy,
) -> Result<DerivStack> {
    let d = order.d;
    let n = series.n();
    if path.len() != n || path.dim() != d {
        return Err(Error::DimensionMismatch(
            "path does not match series".into(),
        ));
    }
    let s0 = order.param_count();
    let maxlag = order.max_lag();
    let estimated = order.power_mode == PowerMode::EstimatedDelta;

    // log(eps^+/-) (eps^+/-)^delta with the 0-at-zero convention
    let (mut wlog_pos, mut wlog_neg) = if estimated {
        (DMatrix::zeros(n, d), DMatrix::zeros(n, d))
    } else {
        (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0))
    };
    if estimated {
        for t in 0..n {
            for i in 0..d {
                let e = series.value(t, i);
                if e > 0.0 {
                    wlog_pos[(t, i)] = e.ln() * path.pos_pow[(t, i)];
                } else if e < 0.0 {
                    wlog_neg[(t, i)] = (-e).ln() * path.neg_pow[(t, i)];
                }
            }
        }
    }

    let omega_off = order.omega_offset();
    let ap_off = order.a_plus_offset();
    let am_off = order.a_minus_offset();
    let b_off = order.b_offset();
    let delta_off = order.delta_offset();

    let mut dg = vec![0.0f64; n * s0 * d];
    let at = |t: usize, k: usize, i: usize| (t * s0 + k) * d + i;

    for t in 0..n {
        if t < maxlag {
            if matches!(init, InitPolicy::OmegaStart) {
                for i in 0..d {
                    dg[at(t, omega_off + i, i)] = 1.0;
                }
            }
            continue;
        }
        for i1 in 0..d {
            // direct terms c_t
            dg[at(t, omega_off + i1, i1)] = 1.0;
            for l in 0..order.q {
                let s = t - 1 - l;
                for i2 in 0..d {
                    dg[at(t, order.mat_index(ap_off, l, i1, i2), i1)] = path.pos_pow[(s, i2)];
                    dg[at(t, order.mat_index(am_off, l, i1, i2), i1)] = path.neg_pow[(s, i2)];
                }
            }
            for j in 0..order.p {
                let s = t - 1 - j;
                for i2 in 0..d {
                    dg[at(t, order.mat_index(b_off, j, i1, i2), i1)] = path.h_pow[(s, i2)];
                }
            }
            if estimated {
                for jd in 0..d {
                    let mut acc = 0.0;
                    for l in 0..order.q {
                        let s = t - 1 - l;
                        acc += params.a_plus[l][(i1, jd)] * wlog_pos[(s, jd)]
                            + params.a_minus[l][(i1, jd)] * wlog_neg[(s, jd)];
                    }
                    dg[at(t, delta_off + jd, i1)] = acc;
                }
            }
            // propagation through the B lags for every coordinate
            if order.p > 0 {
                for k in 0..s0 {
                    let mut acc = dg[at(t, k, i1)];
                    for j in 0..order.p {
                        let s = t - 1 - j;
                        for i2 in 0..d {
                            acc += params.b[j][(i1, i2)] * dg[at(s, k, i2)];
                        }
                    }
                    dg[at(t, k, i1)] = acc;
                }
            }
        }
    }

    // chain rule to d sqrt(h): for theta-coordinates
    //   d sqrt(h_i) = (1/delta_i) sqrt(h_i) / g_i * dg_i,
    // and the power coordinate delta_i adds -(1/delta_i^2) sqrt(h_i) log g_i.
    let mut dsqrt = vec![0.0f64; n * s0 * d];
    for t in 0..n {
        for i in 0..d {
            let g = path.h_pow[(t, i)];
            let sq = path.sqrt_h[(t, i)];
            let scale = sq / (params.delta[i] * g);
            for k in 0..s0 {
                dsqrt[at(t, k, i)] = scale * dg[at(t, k, i)];
            }
            if estimated {
                let k = delta_off + i;
                dsqrt[at(t, k, i)] -= sq * g.ln() / (params.delta[i] * params.delta[i]);
            }
        }
    }

    Ok(DerivStack {
        n,
        d,
        s0,
        power_mode: order.power_mode,
        rho_pairs: lower_triangle_pairs(d),
        rho_offset: order.rho_offset(),
        dg,
        dsqrt,
    })
}
