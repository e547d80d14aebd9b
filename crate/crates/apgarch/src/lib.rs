//! Constant-conditional-correlation asymmetric power GARCH modeling.
//!
//! The crate covers the full workflow for the CCC-APGARCH(p,q) family:
//!
//! - componentwise power-delta volatility recursion with constant correlation,
//!   simulation and a top-Lyapunov-exponent stationarity check ([`model`]);
//! - Gaussian quasi-maximum-likelihood estimation with analytic scores,
//!   either holding the power vector fixed or estimating it jointly ([`qmle`]);
//! - portmanteau adequacy tests built on autocovariances of the sum of
//!   squared residuals, with the estimation-effect covariance correction
//!   ([`portmanteau`]);
//! - a reproducible Monte Carlo harness for size/power studies
//!   ([`experiments`]) and CSV/JSON interfaces ([`io`]).

pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod model;
pub mod portmanteau;
pub mod qmle;
pub mod rng;
pub mod special;

pub use error::{Error, Result};

// re-exported so downstream callers can build vectors/matrices for the API
pub use nalgebra;
