//! Cross-module invariants exercised end-to-end on simulated data.

mod common;

use apgarch::experiments::{benchmark_dgp, run_power_experiment, McConfig};
use apgarch::model::{simulate, volatility_filter, InitPolicy, ModelOrder, PowerMode};
use apgarch::nalgebra::DVector;
use apgarch::qmle::{fit, quasi_loglik, FitConfig};
use apgarch::rng::RngStream;
use apgarch::special::{chi2_sf, normal_quantile};

use common::{garch_alternative, ks_two_sample};

#[test]
fn known_and_estimated_filters_coincide_at_equal_delta() {
    let (_, params) = garch_alternative(&[1.3, 0.8]);
    let dgp = ModelOrder::new(2, 1, 1, PowerMode::KnownDelta);
    let series = simulate(&dgp, &params, 300, 200, RngStream::new(61, 0)).unwrap();
    let known = volatility_filter(&dgp, &params, &series, &InitPolicy::OmegaStart).unwrap();
    let est_order = ModelOrder::new(2, 1, 1, PowerMode::EstimatedDelta);
    let est = volatility_filter(&est_order, &params, &series, &InitPolicy::OmegaStart).unwrap();
    for t in 0..series.n() {
        for i in 0..2 {
            assert!((known.h[(t, i)] - est.h[(t, i)]).abs() <= 1e-12);
            assert!((known.h_pow[(t, i)] - est.h_pow[(t, i)]).abs() <= 1e-12);
        }
    }
}

#[test]
fn burn_in_choice_does_not_change_the_law() {
    let (order, params) = common::asymmetric_arch(&[1.0, 1.0]);
    let n = 4000;
    let a = simulate(&order, &params, n, 500, RngStream::new(62, 0)).unwrap();
    let b = simulate(&order, &params, n, 501, RngStream::new(62, 1)).unwrap();
    let xa: Vec<f64> = (0..n).map(|t| a.value(t, 0)).collect();
    let xb: Vec<f64> = (0..n).map(|t| b.value(t, 0)).collect();
    let (d, p) = ks_two_sample(&xa, &xb);
    assert!(p > 0.01, "KS d={d:.4}, p={p:.4}");
}

#[test]
fn objective_initialization_effect_vanishes_at_rate_one_over_n() {
    let (order, params) = garch_alternative(&[1.0, 1.0]);
    let series = simulate(&order, &params, 2000, 400, RngStream::new(63, 0)).unwrap();
    let custom = InitPolicy::Custom(&params.omega * 2.0);
    let mut scaled_gaps = Vec::new();
    for n in [500usize, 1000, 2000] {
        let prefix =
            apgarch::model::Series::new(apgarch::nalgebra::DMatrix::from_fn(n, 2, |t, i| {
                series.value(t, i)
            }))
            .unwrap();
        let (ta, _) = quasi_loglik(&order, &params, &prefix, &InitPolicy::OmegaStart).unwrap();
        let (tb, _) = quasi_loglik(&order, &params, &prefix, &custom).unwrap();
        scaled_gaps.push(n as f64 * (ta - tb).abs());
    }
    // the t-summed initialization gap converges, so n * |mean difference|
    // is already constant across these lengths
    let max = scaled_gaps.iter().cloned().fold(f64::MIN, f64::max);
    let min = scaled_gaps.iter().cloned().fold(f64::MAX, f64::min);
    assert!(
        max - min <= 0.01 * max,
        "scaled gaps not stable: {scaled_gaps:?}"
    );
}

#[test]
fn sandwich_zscores_are_calibrated() {
    // z = (theta_hat - theta_0) / sqrt(diag vcov) over correctly specified
    // replications should have roughly unit spread in every coordinate
    let (order, params) = benchmark_dgp(&[1.0, 1.0], true, false);
    let s0 = order.param_count();
    let truth = params.to_vector(&order);
    let reps: u64 = 100;
    let mut zs: Vec<Vec<f64>> = vec![Vec::new(); s0];
    for rep in 0..reps {
        let series = simulate(&order, &params, 20_000, 500, RngStream::new(909, rep)).unwrap();
        let config = FitConfig {
            fixed_delta: Some(DVector::from_vec(vec![1.0, 1.0])),
            grad_tol: 1e-5,
            ..FitConfig::default()
        };
        let f = fit(&order, &series, &config).expect("fit at n=20000");
        let est = f.params_hat.to_vector(&order);
        for k in 0..s0 {
            zs[k].push((est[k] - truth[k]) / f.vcov[(k, k)].sqrt());
        }
    }
    for (k, z) in zs.iter().enumerate() {
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let sd = (z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(
            (0.8..=1.25).contains(&sd),
            "coordinate {k}: z-score std {sd:.3} outside [0.8, 1.25]"
        );
    }
}

#[test]
fn power_does_not_decrease_with_sample_length() {
    let (dgp_order, dgp_params) = benchmark_dgp(&[1.0, 1.0], false, true);
    let fitted = ModelOrder::new(2, 0, 1, PowerMode::KnownDelta);
    let mut freqs = Vec::new();
    for (n, seed) in [(250usize, 8101u64), (2000, 8102)] {
        let mut cfg = McConfig::new(dgp_order, dgp_params.clone(), fitted, n, 100, seed);
        cfg.m_max = 4;
        let res = run_power_experiment(&cfg).unwrap();
        freqs.push(res.frequency(1, 4));
    }
    // allow one binomial standard error of slack at N=100
    let p = freqs[0] / 100.0;
    let se = 100.0 * (p * (1.0 - p) / 100.0).sqrt();
    assert!(
        freqs[1] >= freqs[0] - se,
        "power fell with n: {:.1}% at 250 vs {:.1}% at 2000",
        freqs[0],
        freqs[1]
    );
}

#[test]
fn j_matches_finite_difference_hessian_at_the_optimum() {
    // at the optimum the expected-Hessian estimator J and the raw sample
    // Hessian differ by a mean-zero term of order n^{-1/2} (~0.8% at n=5000,
    // measured 0.006-0.011 over seeds); 0.015 separates correct from broken
    let (order, params) = benchmark_dgp(&[1.0, 1.0], true, false);
    let series = simulate(&order, &params, 5000, 500, RngStream::new(88, 0)).unwrap();
    let config = FitConfig {
        fixed_delta: Some(DVector::from_vec(vec![1.0, 1.0])),
        grad_tol: 1e-6,
        ..FitConfig::default()
    };
    let fit_res = fit(&order, &series, &config).unwrap();
    let theta = fit_res.params_hat.to_vector(&order);
    let s0 = order.param_count();
    let init = InitPolicy::OmegaStart;
    let f = |v: &apgarch::nalgebra::DVector<f64>| -> f64 {
        quasi_loglik(
            &order,
            &apgarch::model::Params::from_vector(&order, v, &fit_res.params_hat),
            &series,
            &init,
        )
        .unwrap()
        .0
    };
    let mut hess = apgarch::nalgebra::DMatrix::zeros(s0, s0);
    let f0 = f(&theta);
    let step = |k: usize| 1e-4 * theta[k].abs().max(0.05);
    for i in 0..s0 {
        for j in 0..=i {
            let (hi, hj) = (step(i), step(j));
            let mut v = theta.clone();
            if i == j {
                v[i] = theta[i] + hi;
                let fpp = f(&v);
                v[i] = theta[i] - hi;
                let fmm = f(&v);
                hess[(i, i)] = (fpp - 2.0 * f0 + fmm) / (hi * hi);
            } else {
                v[i] = theta[i] + hi;
                v[j] = theta[j] + hj;
                let fpp = f(&v);
                v[j] = theta[j] - hj;
                let fpm = f(&v);
                v[i] = theta[i] - hi;
                v[j] = theta[j] + hj;
                let fmp = f(&v);
                v[j] = theta[j] - hj;
                let fmm = f(&v);
                hess[(i, j)] = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
                hess[(j, i)] = hess[(i, j)];
            }
        }
    }
    let rel = (&hess - &fit_res.j_hat).norm() / fit_res.j_hat.norm();
    assert!(rel < 0.015, "relative Frobenius gap {rel:.4}");
}

#[test]
fn chi2_tail_matches_simulated_draws() {
    let m = 3;
    // critical value at the 5% tail from the implementation
    let (mut lo, mut hi) = (0.0f64, 50.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_sf(mid, m).unwrap() > 0.05 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let crit = 0.5 * (lo + hi);
    let draws = 500_000;
    let normals = RngStream::new(64, 0).draw_std_normal(draws * m);
    let mut exceed = 0usize;
    for r in 0..draws {
        let x: f64 = (0..m)
            .map(|j| normals[r * m + j] * normals[r * m + j])
            .sum();
        if x > crit {
            exceed += 1;
        }
    }
    let emp = exceed as f64 / draws as f64;
    // within 2% of the nominal 5% tail
    assert!(
        (emp - 0.05).abs() <= 0.001,
        "empirical tail {emp:.5} vs 0.05"
    );
}

#[test]
fn confidence_bands_scale_with_the_quantile() {
    let u95 = normal_quantile(0.95).unwrap();
    let u99 = normal_quantile(0.99).unwrap();
    assert!(u99 > u95 && u95 > 0.0);
}
