//! Direct and inverse solvers for the time-fractional wave equation
//! ∂_t^α u − (a(x) u_x)_x + c(x) u = f(t) h(x), 1 < α < 2.

pub mod cli;
pub mod direct;
pub mod error;
pub mod fracops;
pub mod inverse;
pub mod mlf;
pub mod quad;
pub mod spectral;

pub use error::{Error, Result};
