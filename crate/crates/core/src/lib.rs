pub mod bounds;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod fixed_point;
pub mod kernels;
pub mod linear_bgk;
pub mod quadrature;
pub mod stochastic;

pub use error::{BgkError, Result};
