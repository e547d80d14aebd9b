use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector};

use super::*;
use crate::model::simulate;
use crate::model::test_fixtures::{dgp_symmetric, order01};
use crate::model::Params;
use crate::rng::RngStream;

/// A fit-shaped bundle evaluated at fixed parameters (no optimizer): the
/// information matrices, residuals and derivative stacks are all exact at the
/// supplied point, which is what the assembly formulas consume.
fn fit_at(
    order: &ModelOrder,
    params: &Params,
    series: &Series,
) -> (FitResult, VolatilityPath, DerivStack) {
    let init = InitPolicy::OmegaStart;
    let path = volatility_filter(order, params, series, &init).unwrap();
    let derivs = volatility_derivatives(order, params, series, &path, &init).unwrap();
    let fit = crate::qmle::evaluate_at(order, params, series, &init).unwrap();
    (fit, path, derivs)
}

#[test]
fn single_observation_cancellation() {
    let residuals = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
    let diag = diagnostics_from_residuals(&residuals, 2);
    assert_abs_diff_eq!(diag.s_hat[0], 0.0, epsilon = 1e-15);
}

#[test]
fn gaussian_residual_moments() {
    let n = 50_000;
    let draws = RngStream::new(51, 0).draw_std_normal(2 * n);
    let residuals = DMatrix::from_fn(n, 2, |t, i| draws[2 * t + i]);
    let diag = diagnostics_from_residuals(&residuals, 2);
    let mean = diag.s_hat.iter().sum::<f64>() / n as f64;
    assert!(mean.abs() < 0.03, "mean S {mean}");
    // E[(chi2_2 - 2)^2] = 2d = 4
    assert!(
        (diag.kappa_hat - 4.0).abs() < 0.15,
        "kappa {}",
        diag.kappa_hat
    );
}

#[test]
fn s_equals_trace_of_vec_term() {
    let draws = RngStream::new(52, 0).draw_std_normal(40);
    let residuals = DMatrix::from_fn(20, 2, |t, i| draws[2 * t + i]);
    let diag = diagnostics_from_residuals(&residuals, 2);
    for t in 0..20 {
        let trace = diag.s_vecs[(t, 0)] + diag.s_vecs[(t, 3)];
        assert_abs_diff_eq!(diag.s_hat[t], trace, epsilon = 1e-10);
    }
}

#[test]
fn autocov_hand_sums() {
    let diag = diagnostics_from_s(DVector::from_vec(vec![1.0, 1.0, 1.0, 1.0]));
    let (r, _) = autocov_sum_sq(&diag, 1).unwrap();
    assert_abs_diff_eq!(r[0], 3.0 / 4.0, epsilon = 1e-15);

    let diag = diagnostics_from_s(DVector::from_vec(vec![1.0, -1.0, 1.0, -1.0]));
    let (r, rho) = autocov_sum_sq(&diag, 2).unwrap();
    assert_abs_diff_eq!(r[0], -3.0 / 4.0, epsilon = 1e-15);
    assert_abs_diff_eq!(r[1], 2.0 / 4.0, epsilon = 1e-15);
    // r0 = mean of squares = 1
    assert_abs_diff_eq!(rho[0], -3.0 / 4.0, epsilon = 1e-15);
}

#[test]
fn autocov_matches_double_loop_oracle() {
    let draws = RngStream::new(53, 0).draw_std_normal(50);
    let s_hat = DVector::from_fn(50, |t, _| draws[t] * draws[t] + 0.3 * draws[t]);
    let diag = diagnostics_from_s(s_hat.clone());
    let (r, _) = autocov_sum_sq(&diag, 7).unwrap();
    for h in 1..=7usize {
        let mut acc = 0.0;
        for t in (h + 1)..=50 {
            acc += s_hat[t - 1] * s_hat[t - 1 - h];
        }
        acc /= 50.0;
        assert_abs_diff_eq!(r[h - 1], acc, epsilon = 1e-12);
    }
}

#[test]
fn autocov_rejects_oversized_lag() {
    let diag = diagnostics_from_s(DVector::from_vec(vec![1.0, 2.0, 3.0]));
    assert!(matches!(
        autocov_sum_sq(&diag, 3),
        Err(Error::LagTooLarge { .. })
    ));
}

#[test]
fn zero_derivatives_reduce_d_to_kappa_squared() {
    let order = ModelOrder::new(1, 0, 1, crate::model::PowerMode::KnownDelta);
    let params = Params {
        omega: DVector::from_vec(vec![0.3]),
        a_plus: vec![DMatrix::from_element(1, 1, 0.3)],
        a_minus: vec![DMatrix::from_element(1, 1, 0.3)],
        b: vec![],
        rho: DVector::zeros(0),
        delta: DVector::from_vec(vec![2.0]),
    };
    let s = simulate(&order, &params, 300, 100, RngStream::new(54, 0)).unwrap();
    let (fit, path, _) = fit_at(&order, &params, &s);
    let zero_stack = DerivStack::zeroed(&order, s.n());
    let diag = residual_diagnostics(&fit, 1);
    let asm = assemble_d(&order, &fit, &path, &zero_stack, &diag, 1, DMethod::General).unwrap();
    assert_abs_diff_eq!(
        asm.d_hat[(0, 0)],
        diag.kappa_hat * diag.kappa_hat,
        epsilon = 1e-12
    );
}

#[test]
fn c_matrix_matches_trace_oracle() {
    let order = order01(crate::model::PowerMode::KnownDelta);
    let params = dgp_symmetric(&[1.0, 1.0]);
    let s = simulate(&order, &params, 50, 100, RngStream::new(55, 0)).unwrap();
    let (fit, path, derivs) = fit_at(&order, &params, &s);
    let diag = residual_diagnostics(&fit, 2);
    let m = 4;
    let asm = assemble_d(&order, &fit, &path, &derivs, &diag, m, DMethod::General).unwrap();
    let n = s.n();
    for h in 1..=m {
        for k in 0..order.param_count() {
            // independent route: dense inverse of the dense H matrix
            let mut acc = 0.0;
            for t in (h + 1)..=n {
                let t0 = t - 1;
                let h_inv = path.h_matrix(t0).try_inverse().unwrap();
                let dh = derivs.dh_matrix(&path, t0, k);
                acc -= diag.s_hat[t0 - h] * (&h_inv * &dh).trace();
            }
            acc /= n as f64;
            assert_abs_diff_eq!(asm.c_m[(h - 1, k)], acc, epsilon = 1e-10);
        }
    }
}

#[test]
fn sigma_phi_equals_negated_score() {
    // h_t(i)' vec(eta eta' - I) is the negated score coordinate
    let order = order01(crate::model::PowerMode::KnownDelta);
    let params = dgp_symmetric(&[1.0, 1.0]);
    let s = simulate(&order, &params, 60, 100, RngStream::new(56, 0)).unwrap();
    let (fit, path, derivs) = fit_at(&order, &params, &s);
    let rows = crate::qmle::score(&order, &params, &s, &path, &derivs).unwrap();
    let diag = residual_diagnostics(&fit, 2);
    for t in 0..s.n() {
        let ops = path.h_ops(t).unwrap();
        for k in 0..order.param_count() {
            let dh = derivs.dh_matrix(&path, t, k);
            let g = &ops.inv_sqrt * &dh * &ops.inv_sqrt;
            let mut phi = 0.0;
            for b in 0..2 {
                for a in 0..2 {
                    phi += g[(a, b)] * diag.s_vecs[(t, b * 2 + a)];
                }
            }
            assert_abs_diff_eq!(phi, -rows[t][k], epsilon = 1e-9);
        }
    }
}

#[test]
fn statistic_zero_for_perfect_fit() {
    let asm = CovarianceAssembly {
        method: DMethod::General,
        m: 2,
        c_m: DMatrix::zeros(2, 3),
        sigma: DMatrix::zeros(3, 2),
        d_hat: DMatrix::identity(2, 2) * 4.0,
        d_rho_hat: DMatrix::identity(2, 2),
        kappa_hat: 2.0,
        condition: 1.0,
        asymmetry: 0.0,
    };
    let r = DVector::zeros(2);
    let report = portmanteau_test(&asm, &r, &r, 100, 2, 0.05).unwrap();
    assert_eq!(report.stat_r, 0.0);
    assert_eq!(report.pvalue_r, 1.0);
}

#[test]
fn scalar_statistic_arithmetic() {
    let asm = CovarianceAssembly {
        method: DMethod::General,
        m: 1,
        c_m: DMatrix::zeros(1, 3),
        sigma: DMatrix::zeros(3, 1),
        d_hat: DMatrix::from_element(1, 1, 4.0),
        d_rho_hat: DMatrix::from_element(1, 1, 1.0),
        kappa_hat: 2.0,
        condition: 1.0,
        asymmetry: 0.0,
    };
    let r = DVector::from_vec(vec![0.2]);
    let rho = DVector::from_vec(vec![0.1]);
    let report = portmanteau_test(&asm, &r, &rho, 100, 1, 0.05).unwrap();
    assert_abs_diff_eq!(report.stat_r, 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(report.pvalue_r, 0.3173, epsilon = 1e-4);
}

#[test]
fn r_and_rho_statistics_coincide_for_general_method() {
    // rho = r / r0 and D_rho = D / kappa^2 with r0 = kappa, so the two
    // quadratic forms are identical
    let order = order01(crate::model::PowerMode::KnownDelta);
    let params = dgp_symmetric(&[1.0, 1.0]);
    let s = simulate(&order, &params, 400, 100, RngStream::new(57, 0)).unwrap();
    let (fit, path, derivs) = fit_at(&order, &params, &s);
    let diag = residual_diagnostics(&fit, 2);
    let asm = assemble_d(&order, &fit, &path, &derivs, &diag, 3, DMethod::General).unwrap();
    let (r, rho) = autocov_sum_sq(&diag, 3).unwrap();
    for m in 1..=3 {
        let rep = portmanteau_test(&asm, &r, &rho, s.n(), m, 0.05).unwrap();
        assert_abs_diff_eq!(
            rep.stat_r,
            rep.stat_rho,
            epsilon = 1e-8 * rep.stat_r.max(1.0)
        );
        assert!(rep.stat_r >= 0.0);
        assert!(rep.bands.iter().all(|b| *b > 0.0));
    }
}

#[test]
fn assembly_symmetry_and_rho_range() {
    let order = order01(crate::model::PowerMode::KnownDelta);
    let params = dgp_symmetric(&[1.0, 1.0]);
    let s = simulate(&order, &params, 600, 100, RngStream::new(58, 0)).unwrap();
    let (fit, path, derivs) = fit_at(&order, &params, &s);
    let diag = residual_diagnostics(&fit, 2);
    let asm = assemble_d(&order, &fit, &path, &derivs, &diag, 6, DMethod::General).unwrap();
    assert!(asm.asymmetry < 1e-8, "asymmetry {}", asm.asymmetry);
    for a in 0..6 {
        for b in 0..6 {
            assert_eq!(asm.d_hat[(a, b)], asm.d_hat[(b, a)]);
        }
    }
    let (_, rho) = autocov_sum_sq(&diag, 6).unwrap();
    for h in 0..6 {
        assert!(rho[h].abs() <= 1.0 + 1e-9, "rho[{h}] = {}", rho[h]);
    }
}

#[test]
fn statistic_is_permutation_equivariant() {
    // swapping the two components of data and parameters together leaves the
    // quadratic form unchanged
    let order = order01(crate::model::PowerMode::KnownDelta);
    let params = dgp_symmetric(&[1.0, 1.0]);
    let s = simulate(&order, &params, 300, 100, RngStream::new(59, 0)).unwrap();

    let swap = |m: &DMatrix<f64>| DMatrix::from_fn(2, 2, |r, c| m[(1 - r, 1 - c)]);
    let params_swapped = Params {
        omega: DVector::from_vec(vec![params.omega[1], params.omega[0]]),
        a_plus: vec![swap(&params.a_plus[0])],
        a_minus: vec![swap(&params.a_minus[0])],
        b: vec![],
        rho: params.rho.clone(),
        delta: DVector::from_vec(vec![params.delta[1], params.delta[0]]),
    };
    let s_swapped = s.with_swapped_columns(0, 1);

    let run = |order: &ModelOrder, p: &Params, s: &Series| {
        let (fit, path, derivs) = fit_at(order, p, s);
        let diag = residual_diagnostics(&fit, 2);
        let asm = assemble_d(order, &fit, &path, &derivs, &diag, 3, DMethod::General).unwrap();
        let (r, rho) = autocov_sum_sq(&diag, 3).unwrap();
        portmanteau_test(&asm, &r, &rho, s.n(), 3, 0.05)
            .unwrap()
            .stat_r
    };
    let a = run(&order, &params, &s);
    let b = run(&order, &params_swapped, &s_swapped);
    assert_abs_diff_eq!(a, b, epsilon = 1e-8 * a.max(1.0));
}
