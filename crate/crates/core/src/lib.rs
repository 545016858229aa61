//! Boosted recurrent-event mean cumulative function models.
//!
//! Trees partition individuals by static features; every leaf carries either a
//! whole curve over a time grid (static mode) or coefficients of spline
//! functions applied to time-varying covariates (dynamic mode).

pub mod baselines;
pub mod boost_dynamic;
pub mod boost_static;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod group_lasso;
pub mod io;
pub mod metrics;
pub mod model;
pub mod simulate;
pub mod spline;
pub mod tree;

pub use data::{curve_integral, empirical_mcf, Curve, Dataset, DynamicSeries, EventHistory, Individual, TimeGrid};
pub use error::{BoostError, Result};
