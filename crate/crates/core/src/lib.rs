//! Lower-tail clustering of financial time series.
//!
//! Each pair of series is linked by a set of fitted bivariate copulas. Finite
//! lower tail-dependence coefficients at several quantile levels turn into
//! dissimilarity matrices, each of which is clustered hierarchically. The
//! resulting ensemble of partitions is combined through a co-association
//! matrix into one consensus partition, which then drives a cluster-
//! constrained minimum-CVaR portfolio.

#![allow(clippy::excessive_precision, clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bvn;
pub mod copula;
pub mod data;
pub mod dissimilarity;
pub mod ensemble;
pub mod error;
#[doc(hidden)]
pub mod fuzzing;
pub mod hierclust;
pub mod io;
pub mod marginal;
pub mod optim;
pub mod pipeline;
pub mod portfolio;
#[doc(hidden)]
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
