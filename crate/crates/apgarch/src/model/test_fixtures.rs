//! Shared bivariate parameterizations used across the unit tests.

use nalgebra::{DMatrix, DVector};

use super::params::{ModelOrder, Params, PowerMode};

pub fn order01(power_mode: PowerMode) -> ModelOrder {
    ModelOrder::new(2, 0, 1, power_mode)
}

pub fn order11(power_mode: PowerMode) -> ModelOrder {
    ModelOrder::new(2, 1, 1, power_mode)
}

fn base(
    a_plus: DMatrix<f64>,
    a_minus: DMatrix<f64>,
    b: Vec<DMatrix<f64>>,
    delta: &[f64],
) -> Params {
    Params {
        omega: DVector::from_vec(vec![0.2, 0.3]),
        a_plus: vec![a_plus],
        a_minus: vec![a_minus],
        b,
        rho: DVector::from_vec(vec![0.7]),
        delta: DVector::from_vec(delta.to_vec()),
    }
}

/// ARCH-type DGP with equal positive/negative response matrices.
pub fn dgp_symmetric(delta: &[f64]) -> Params {
    let a = DMatrix::from_row_slice(2, 2, &[0.45, 0.25, 0.25, 0.35]);
    base(a.clone(), a, vec![], delta)
}

/// ARCH-type DGP with distinct positive/negative response matrices.
pub fn dgp_asymmetric(delta: &[f64]) -> Params {
    base(
        DMatrix::from_row_slice(2, 2, &[0.25, 0.10, 0.10, 0.15]),
        DMatrix::from_row_slice(2, 2, &[0.45, 0.25, 0.25, 0.35]),
        vec![],
        delta,
    )
}

/// GARCH-type alternative: the asymmetric DGP plus one volatility lag.
pub fn dgp_alternative11(delta: &[f64]) -> Params {
    base(
        DMatrix::from_row_slice(2, 2, &[0.25, 0.10, 0.10, 0.15]),
        DMatrix::from_row_slice(2, 2, &[0.45, 0.25, 0.25, 0.35]),
        vec![DMatrix::from_row_slice(2, 2, &[0.43, 0.1, 0.1, 0.42])],
        delta,
    )
}
