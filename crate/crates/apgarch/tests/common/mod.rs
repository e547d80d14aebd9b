//! Shared helpers for the integration suites: Kolmogorov-Smirnov machinery
//! and fixed reference parameterizations.

#![allow(dead_code)]

use apgarch::model::{ModelOrder, Params, PowerMode};
use apgarch::nalgebra::{DMatrix, DVector};

/// Asymptotic Kolmogorov distribution tail with Stephens' finite-n factor.
fn ks_pvalue(d: f64, n_eff: f64) -> f64 {
    let lambda = (n_eff.sqrt() + 0.12 + 0.11 / n_eff.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        p += if k % 2 == 1 { term } else { -term };
    }
    p.clamp(0.0, 1.0)
}

/// One-sample KS test of `sample` against the CDF `f`. Returns (statistic, p).
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], f: F) -> (f64, f64) {
    let mut x: Vec<f64> = sample.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = x.len() as f64;
    let mut d = 0.0f64;
    for (i, v) in x.iter().enumerate() {
        let cdf = f(*v);
        let hi = (i as f64 + 1.0) / n - cdf;
        let lo = cdf - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    (d, ks_pvalue(d, n))
}

/// Two-sample KS test. Returns (statistic, p).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut xa: Vec<f64> = a.to_vec();
    let mut xb: Vec<f64> = b.to_vec();
    xa.sort_by(|p, q| p.partial_cmp(q).unwrap());
    xb.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (na, nb) = (xa.len(), xb.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < na && j < nb {
        let v = xa[i].min(xb[j]);
        while i < na && xa[i] <= v {
            i += 1;
        }
        while j < nb && xb[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let n_eff = (na * nb) as f64 / (na + nb) as f64;
    (d, ks_pvalue(d, n_eff))
}

/// Reference bivariate parameter sets (the benchmark DGPs of the experiments).
pub fn asymmetric_arch(delta: &[f64]) -> (ModelOrder, Params) {
    let order = ModelOrder::new(2, 0, 1, PowerMode::KnownDelta);
    let params = Params {
        omega: DVector::from_vec(vec![0.2, 0.3]),
        a_plus: vec![DMatrix::from_row_slice(2, 2, &[0.25, 0.10, 0.10, 0.15])],
        a_minus: vec![DMatrix::from_row_slice(2, 2, &[0.45, 0.25, 0.25, 0.35])],
        b: vec![],
        rho: DVector::from_vec(vec![0.7]),
        delta: DVector::from_vec(delta.to_vec()),
    };
    (order, params)
}

pub fn garch_alternative(delta: &[f64]) -> (ModelOrder, Params) {
    let (_, base) = asymmetric_arch(delta);
    let order = ModelOrder::new(2, 1, 1, PowerMode::KnownDelta);
    let params = Params {
        b: vec![DMatrix::from_row_slice(2, 2, &[0.43, 0.1, 0.1, 0.42])],
        ..base
    };
    (order, params)
}
