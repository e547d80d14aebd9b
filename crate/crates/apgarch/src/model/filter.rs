//! Conditional-variance recursion.
//!
//! The filter propagates g_{i,t} = h_{i,t}^{delta_i/2} through
//!
//!   g_t = omega + sum_l { A_l^+ x^+_{t-l} + A_l^- x^-_{t-l} } + sum_j B_j g_{t-j}
//!
//! where x^+_{i,s} = max(eps_{i,s}, 0)^{delta_i} and x^-_{i,s} = max(-eps_{i,s}, 0)^{delta_i}
//! (the componentwise powers of the squared positive/negative parts). The first
//! max(p,q) rows come from the initialization policy; estimation is conditional
//! on them and their influence dies out geometrically.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{sym_sqrt_inv, SymMatrix, SymOps};

use super::params::{ModelOrder, Params};
use super::series::Series;

const H_POW_CEIL: f64 = 1e300;

/// How the pre-recursion rows of h^{delta/2} are seeded.
#[derive(Debug, Clone, PartialEq)]
pub enum InitPolicy {
    /// Rows t <= max(p,q) set to omega (and pre-sample shocks to zero).
    OmegaStart,
    /// Rows t <= max(p,q) set to a fixed d-vector.
    Custom(DVector<f64>),
}

impl InitPolicy {
    pub fn label(&self) -> String {
        match self {
            InitPolicy::OmegaStart => "omega-start".to_string(),
            InitPolicy::Custom(v) => format!("custom({:?})", v.as_slice()),
        }
    }
}

/// Per-time conditional quantities produced by the filter.
///
/// H_t = D_t R D_t is kept in factored form: the inverse, quadratic forms and
/// log-determinants come from R's decomposition plus the diagonal of D_t, and
/// the symmetric root of the full H_t is built on demand.
#[derive(Debug, Clone)]
pub struct VolatilityPath {
    /// n x d matrix of h^{delta/2}.
    pub h_pow: DMatrix<f64>,
    /// n x d matrix of h.
    pub h: DMatrix<f64>,
    /// n x d matrix of sqrt(h) (the diagonal of D_t).
    pub sqrt_h: DMatrix<f64>,
    /// Powered positive parts x^+ (n x d), shared with the derivative recursion.
    pub pos_pow: DMatrix<f64>,
    /// Powered negative parts x^- (n x d).
    pub neg_pow: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub r_ops: SymOps,
    pub delta: DVector<f64>,
}

impl VolatilityPath {
    pub fn len(&self) -> usize {
        self.h_pow.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.h_pow.ncols()
    }

    /// H_t = D R D.
    pub fn h_matrix(&self, t: usize) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |a, b| {
            self.r[(a, b)] * self.sqrt_h[(t, a)] * self.sqrt_h[(t, b)]
        })
    }

    /// H_t^{-1} = D^{-1} R^{-1} D^{-1}.
    pub fn h_inv(&self, t: usize) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |a, b| {
            self.r_ops.inv[(a, b)] / (self.sqrt_h[(t, a)] * self.sqrt_h[(t, b)])
        })
    }

    /// log det H_t = log det R + sum_i log h_{i,t}.
    pub fn logdet_h(&self, t: usize) -> f64 {
        self.r_ops.logdet + (0..self.dim()).map(|i| self.h[(t, i)].ln()).sum::<f64>()
    }

    /// eps_t' H_t^{-1} eps_t.
    pub fn quad_form(&self, t: usize, series: &Series) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for a in 0..d {
            let ea = series.value(t, a) / self.sqrt_h[(t, a)];
            for b in 0..d {
                let eb = series.value(t, b) / self.sqrt_h[(t, b)];
                acc += ea * self.r_ops.inv[(a, b)] * eb;
            }
        }
        acc
    }

    /// Spectral root/inverse of the full H_t (used for residuals and the
    /// vec(H^{-1/2} dH H^{-1/2}) terms).
    pub fn h_ops(&self, t: usize) -> Result<SymOps> {
        sym_sqrt_inv(&SymMatrix::from_symmetric_unchecked(self.h_matrix(t)))
    }
}

/// Runs the volatility recursion over a series.
pub fn volatility_filter(
    order: &ModelOrder,
    params: &Params,
    series: &Series,
    init: &InitPolicy,
) -> Result<VolatilityPath> {
    let d = order.d;
    if series.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "series dimension {} does not match model dimension {d}",
            series.dim()
        )));
    }
    let n = series.n();
    let r = params.correlation_matrix(d);
    let r_ops = params.correlation_ops(d)?;
    let delta = params.delta.clone();

    let mut pos_pow = DMatrix::zeros(n, d);
    let mut neg_pow = DMatrix::zeros(n, d);
    for t in 0..n {
        for i in 0..d {
            let e = series.value(t, i);
            if e > 0.0 {
                pos_pow[(t, i)] = e.powf(delta[i]);
            } else if e < 0.0 {
                neg_pow[(t, i)] = (-e).powf(delta[i]);
            }
        }
    }

    let init_row: DVector<f64> = match init {
        InitPolicy::OmegaStart => params.omega.clone(),
        InitPolicy::Custom(v) => {
            if v.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "custom init has {} entries, expected {d}",
                    v.len()
                )));
            }
            v.clone()
        }
    };

    let maxlag = order.max_lag();
    let mut h_pow = DMatrix::zeros(n, d);
    for t in 0..n {
        if t < maxlag {
            for i in 0..d {
                h_pow[(t, i)] = init_row[i];
            }
            continue;
        }
        for i1 in 0..d {
            let mut acc = params.omega[i1];
            for l in 0..order.q {
                let s = t - 1 - l;
                for i2 in 0..d {
                    acc += params.a_plus[l][(i1, i2)] * pos_pow[(s, i2)]
                        + params.a_minus[l][(i1, i2)] * neg_pow[(s, i2)];
                }
            }
            for j in 0..order.p {
                let s = t - 1 - j;
                for i2 in 0..d {
                    acc += params.b[j][(i1, i2)] * h_pow[(s, i2)];
                }
            }
            if !(acc > 0.0 && acc <= H_POW_CEIL) {
                return Err(Error::NumericOverflow { t });
            }
            h_pow[(t, i1)] = acc;
        }
    }

    let mut h = DMatrix::zeros(n, d);
    let mut sqrt_h = DMatrix::zeros(n, d);
    for t in 0..n {
        for i in 0..d {
            let g = h_pow[(t, i)];
            let hv = g.powf(2.0 / delta[i]);
            if !hv.is_finite() || hv <= 0.0 {
                return Err(Error::NumericOverflow { t });
            }
            h[(t, i)] = hv;
            sqrt_h[(t, i)] = hv.sqrt();
        }
    }

    Ok(VolatilityPath {
        h_pow,
        h,
        sqrt_h,
        pos_pow,
        neg_pow,
        r,
        r_ops,
        delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_fixtures::{dgp_asymmetric, order01};
    use crate::model::PowerMode;
    use approx::assert_abs_diff_eq;

    fn series(rows: &[[f64; 2]]) -> Series {
        Series::new(DMatrix::from_fn(rows.len(), 2, |t, i| rows[t][i])).unwrap()
    }

    #[test]
    fn constant_volatility_when_no_dynamics() {
        let order = ModelOrder::new(2, 0, 0, PowerMode::KnownDelta);
        let params = Params {
            omega: DVector::from_vec(vec![0.2, 0.3]),
            a_plus: vec![],
            a_minus: vec![],
            b: vec![],
            rho: DVector::from_vec(vec![0.0]),
            delta: DVector::from_vec(vec![2.0, 2.0]),
        };
        let s = series(&[[1.0, -1.0], [0.5, 0.5], [2.0, -2.0]]);
        let path = volatility_filter(&order, &params, &s, &InitPolicy::OmegaStart).unwrap();
        for t in 0..3 {
            assert_abs_diff_eq!(path.h_pow[(t, 0)], 0.2, epsilon = 1e-15);
            assert_abs_diff_eq!(path.h_pow[(t, 1)], 0.3, epsilon = 1e-15);
            assert_abs_diff_eq!(path.h[(t, 0)], 0.2, epsilon = 1e-15);
            assert_abs_diff_eq!(path.h[(t, 1)], 0.3, epsilon = 1e-15);
        }
    }

    #[test]
    fn one_step_hand_computation_delta_two() {
        // shock (1,-1): positive part feeds column 1 of A+, negative part column 2 of A-
        let order = order01(PowerMode::KnownDelta);
        let params = dgp_asymmetric(&[2.0, 2.0]);
        let s = series(&[[1.0, -1.0], [0.0, 0.0]]);
        let path = volatility_filter(&order, &params, &s, &InitPolicy::OmegaStart).unwrap();
        assert_abs_diff_eq!(path.h_pow[(1, 0)], 0.2 + 0.25 + 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(path.h_pow[(1, 1)], 0.3 + 0.10 + 0.35, epsilon = 1e-15);
    }

    #[test]
    fn one_step_hand_computation_delta_one() {
        // with delta=1 the powered shocks are |eps| on the matching sign:
        // eps = (2,-3) gives x+ = (2,0), x- = (0,3)
        let order = order01(PowerMode::KnownDelta);
        let params = dgp_asymmetric(&[1.0, 1.0]);
        let s = series(&[[2.0, -3.0], [0.0, 0.0]]);
        let path = volatility_filter(&order, &params, &s, &InitPolicy::OmegaStart).unwrap();
        assert_abs_diff_eq!(
            path.h_pow[(1, 0)],
            0.2 + 0.25 * 2.0 + 0.25 * 3.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            path.h_pow[(1, 1)],
            0.3 + 0.10 * 2.0 + 0.35 * 3.0,
            epsilon = 1e-15
        );
        // h = (h^{delta/2})^{2/delta} squares the state when delta = 1
        assert_abs_diff_eq!(path.h[(1, 0)], 1.45f64.powi(2), epsilon = 1e-15);
    }

    #[test]
    fn overflow_is_reported_with_time_index() {
        let order = order01(PowerMode::KnownDelta);
        let params = dgp_asymmetric(&[2.0, 2.0]);
        let s = series(&[[1e200, 0.0], [0.0, 0.0]]);
        match volatility_filter(&order, &params, &s, &InitPolicy::OmegaStart).unwrap_err() {
            Error::NumericOverflow { t } => assert_eq!(t, 1),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn h_pow_never_below_omega_floor() {
        let order = order01(PowerMode::KnownDelta);
        let params = dgp_asymmetric(&[1.0, 1.0]);
        let rows: Vec<[f64; 2]> = (0..200)
            .map(|t| {
                [
                    ((t * 37) % 11) as f64 / 5.0 - 1.0,
                    ((t * 53) % 13) as f64 / 6.0 - 1.0,
                ]
            })
            .collect();
        let s = series(&rows);
        let path = volatility_filter(&order, &params, &s, &InitPolicy::OmegaStart).unwrap();
        let floor = 0.2;
        for t in 0..s.n() {
            for i in 0..2 {
                assert!(path.h_pow[(t, i)] >= floor - 1e-15);
            }
        }
    }

    proptest::proptest! {
        // the recursion adds nonnegative terms to omega, so h^{delta/2} can
        // never fall below the smallest intercept, whatever the data
        #[test]
        fn h_pow_floor_holds_for_any_data(
            raw in proptest::collection::vec(-3.0f64..3.0, 40),
            d1 in 0.5f64..3.0,
            d2 in 0.5f64..3.0,
            a_scale in 0.0f64..0.4,
        ) {
            let order = order01(PowerMode::KnownDelta);
            let mut params = dgp_asymmetric(&[d1, d2]);
            params.a_plus[0] *= a_scale;
            params.a_minus[0] *= a_scale;
            let s = Series::new(DMatrix::from_fn(20, 2, |t, i| raw[2 * t + i])).unwrap();
            let path = volatility_filter(&order, &params, &s, &InitPolicy::OmegaStart).unwrap();
            let floor = 0.2;
            for t in 0..s.n() {
                for i in 0..2 {
                    proptest::prop_assert!(path.h_pow[(t, i)] >= floor - 1e-15);
                    proptest::prop_assert!(path.h[(t, i)].is_finite());
                }
            }
        }
    }

    #[test]
    fn factored_h_ops_match_direct_computation() {
        let order = order01(PowerMode::KnownDelta);
        let params = dgp_asymmetric(&[1.0, 1.5]);
        let s = series(&[[2.0, -3.0], [0.5, 0.4], [-1.0, 0.3]]);
        let path = volatility_filter(&order, &params, &s, &InitPolicy::OmegaStart).unwrap();
        for t in 0..3 {
            let h = path.h_matrix(t);
            let inv = path.h_inv(t);
            let id = &h * &inv;
            for a in 0..2 {
                for b in 0..2 {
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(id[(a, b)], want, epsilon = 1e-12);
                }
            }
            let direct = h.determinant().ln();
            assert_abs_diff_eq!(path.logdet_h(t), direct, epsilon = 1e-12);
        }
    }
}
