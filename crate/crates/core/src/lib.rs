#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covariance;
pub mod error;
pub mod estimator;
pub mod hypothesis;
pub mod ir;
pub mod lambda;
pub mod linalg;
pub mod mc;
pub mod normal;
pub mod process;
pub mod quadrature;
pub mod rng;
pub mod series;
pub mod spectral;

pub use error::{MirError, Result};
pub use series::TimeSeries;
