//! Lagrange bases for Matern and surface-spline radial basis functions on
//! bounded planar and interval domains, with the quadrature, norm and study
//! machinery needed to measure the stability, Nikolskii, Bernstein,
//! truncation and trace inequalities they satisfy.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod interpolation;
pub mod kernels;
pub mod norms;

pub use error::{Error, Result};
