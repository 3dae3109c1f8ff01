//! Endogenous identification of the inequality-insensitive middle class.
//!
//! Given a sample of percentile income distributions, every interval
//! `(p, q)` of the distribution is regressed on an inequality index. Poor
//! intervals lose share as inequality rises, rich intervals gain it, and
//! the middle class of size `M` is the interval whose share does not
//! respond: `beta(p, q) = 0` with `q - p = M`, or more generally the
//! interval minimizing the `R^2` of that regression.

// `!(x > 0.0)` is used throughout to reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data_io;
pub mod distribution;
pub mod error;
pub mod frontier;
pub mod inequality;
pub mod optimize;
pub mod panel_analysis;
pub mod pareto;
pub mod regression;
pub mod sample;
pub mod synthetic;

pub use data_io::{CovariateKey, Panel};
pub use distribution::{ClassDecomposition, PercentileDistribution, QuantileInterval, PERCENTILES};
pub use error::{Error, ErrorClass, Result};
pub use frontier::{BetaSurface, MiddleClassSolution, Objective};
pub use inequality::{InequalityKind, InequalityMeasure};
pub use pareto::{MonteCarloConfig, ParetoSociety};
pub use regression::{CovType, RegressionFit};
pub use sample::{CrossSection, UnitKey};
