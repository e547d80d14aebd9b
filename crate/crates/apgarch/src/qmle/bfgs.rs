//! Quasi-Newton minimizer with backtracking line search.
//!
//! The objective closure returns None when the iterate is numerically
//! inadmissible (exploding recursion, indefinite correlation); the line search
//! treats that as an infinite value and backtracks.

use nalgebra::{DMatrix, DVector};

const ARMIJO_C1: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;
const MAX_DIR_NORM: f64 = 20.0;

pub struct BfgsOutcome {
    pub x: DVector<f64>,
    pub f: f64,
    pub grad: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn minimize<F>(
    mut eval: F,
    x0: DVector<f64>,
    max_iters: usize,
    grad_tol: f64,
) -> Option<BfgsOutcome>
where
    F: FnMut(&DVector<f64>) -> Option<(f64, DVector<f64>)>,
{
    let n = x0.len();
    let mut x = x0;
    let (mut fx, mut gx) = eval(&x)?;
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut iterations = 0;

    while iterations < max_iters {
        let gmax = gx.amax();
        if gmax < grad_tol {
            return Some(BfgsOutcome {
                x,
                f: fx,
                grad: gx,
                iterations,
                converged: true,
            });
        }
        iterations += 1;

        let mut dir = -(&h_inv * &gx);
        if dir.dot(&gx) >= 0.0 {
            // lost positive definiteness, restart from steepest descent
            h_inv = DMatrix::identity(n, n);
            dir = -gx.clone();
        }
        let dn = dir.norm();
        if dn > MAX_DIR_NORM {
            dir *= MAX_DIR_NORM / dn;
        }
        let slope = dir.dot(&gx);

        let mut step = 1.0f64;
        let mut accepted: Option<(DVector<f64>, f64, DVector<f64>)> = None;
        while step >= MIN_STEP {
            let cand = &x + &dir * step;
            if let Some((fc, gc)) = eval(&cand) {
                if fc <= fx + ARMIJO_C1 * step * slope {
                    accepted = Some((cand, fc, gc));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            // no admissible step remains
            return Some(BfgsOutcome {
                x,
                f: fx,
                grad: gx,
                iterations,
                converged: false,
            });
        };

        let s = &x_new - &x;
        let y = &g_new - &gx;
        let sy = s.dot(&y);
        if sy > 1e-10 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            // Sherman-Morrison form of the inverse BFGS update
            h_inv += (sy + yhy) * rho * rho * (&s * s.transpose())
                - rho * (&hy * s.transpose() + &s * hy.transpose());
        }
        x = x_new;
        fx = f_new;
        gx = g_new;
    }
    Some(BfgsOutcome {
        x,
        f: fx,
        grad: gx,
        iterations,
        converged: false,
    })
}
