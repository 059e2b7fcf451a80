//! Numerical laboratory for the supercritical semilinear heat equation
//! `u_t - Δu = |u|^{p-1} u` with radially symmetric data.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure
//! computation: radial fields and their norms, geometric quadrature kernels,
//! Morrey-norm estimation, a method-of-lines solver with blowup detection,
//! similarity-variable energy diagnostics, a Duhamel (mild solution) Picard
//! iteration and threshold bisection along rays of initial data. File
//! formats, configuration and the command line live in the `heatlab` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

extern crate alloc;

pub mod duhamel;
pub mod error;
pub mod evolution;
pub mod field;
pub mod hypotheses;
pub mod math;
pub mod morrey;
pub mod params;
pub mod profiles;
pub mod quadrature;
pub mod similarity;
pub mod threshold;

pub use error::{Error, Result};
pub use field::{Boundary, RadialField, RadialGrid};
pub use params::ModelParams;
pub use profiles::Profile;
