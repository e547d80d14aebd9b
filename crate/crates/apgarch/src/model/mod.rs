//! Model definition: parameters, volatility recursion, simulation,
//! stationarity check and analytic derivatives.

mod deriv;
mod filter;
mod lyapunov;
mod params;
mod series;
mod simulate;

#[cfg(test)]
pub(crate) mod test_fixtures;

pub use deriv::{volatility_derivatives, DerivStack};
pub use filter::{volatility_filter, InitPolicy, VolatilityPath};
pub use lyapunov::{lyapunov_exponent, lyapunov_exponent_with_period, LyapunovEstimate};
pub use params::{lower_triangle_pairs, validate_params, ModelOrder, Params, PowerMode};
pub use series::Series;
pub use simulate::simulate;
