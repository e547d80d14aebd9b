//! Smooth bijections between the constrained parameter space and R^{s0}.
//!
//! omega and the A/B entries live on log scales (the latter shifted by a small
//! floor so zero entries stay representable), rho uses the Fisher transform
//! and delta a logistic map onto its (lo, hi) box.

use nalgebra::DVector;

use crate::model::ModelOrder;

pub const EPS_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Reparam {
    order: ModelOrder,
    pub delta_lo: f64,
    pub delta_hi: f64,
}

impl Reparam {
    pub fn new(order: ModelOrder, delta_bounds: (f64, f64)) -> Self {
        Self {
            order,
            delta_lo: delta_bounds.0,
            delta_hi: delta_bounds.1,
        }
    }

    fn kind(&self, k: usize) -> Kind {
        let o = &self.order;
        if k < o.a_plus_offset() {
            Kind::Log
        } else if k < o.rho_offset() {
            Kind::ShiftedLog
        } else if k < o.delta_offset() {
            Kind::FisherZ
        } else {
            Kind::LogisticBox
        }
    }

    pub fn to_unconstrained(&self, theta: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(theta.len(), |k, _| match self.kind(k) {
            Kind::Log => theta[k].ln(),
            Kind::ShiftedLog => (theta[k] + EPS_FLOOR).ln(),
            Kind::FisherZ => theta[k].atanh(),
            Kind::LogisticBox => {
                let (lo, hi) = (self.delta_lo, self.delta_hi);
                ((theta[k] - lo) / (hi - theta[k])).ln()
            }
        })
    }

    pub fn to_constrained(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(u.len(), |k, _| match self.kind(k) {
            Kind::Log => u[k].exp(),
            Kind::ShiftedLog => u[k].exp() - EPS_FLOOR,
            Kind::FisherZ => u[k].tanh(),
            Kind::LogisticBox => {
                let (lo, hi) = (self.delta_lo, self.delta_hi);
                lo + (hi - lo) / (1.0 + (-u[k]).exp())
            }
        })
    }

    /// Diagonal Jacobian d theta_k / d u_k evaluated at theta.
    pub fn jacobian_diag(&self, theta: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(theta.len(), |k, _| match self.kind(k) {
            Kind::Log => theta[k],
            Kind::ShiftedLog => theta[k] + EPS_FLOOR,
            Kind::FisherZ => 1.0 - theta[k] * theta[k],
            Kind::LogisticBox => {
                let (lo, hi) = (self.delta_lo, self.delta_hi);
                (theta[k] - lo) * (hi - theta[k]) / (hi - lo)
            }
        })
    }
}

enum Kind {
    Log,
    ShiftedLog,
    FisherZ,
    LogisticBox,
}
