//! Semiclassical nonvanishing criteria for quadratic nonlinear eigenvalue
//! problems of the form (−h²Δ + Q(x,h)² + (P(x,h) − z)²)u = 0.
//!
//! The library computes the leading trace coefficient H₀ of the block
//! linearization by several independent routes (closed form, semi-numeric
//! fiber reduction, direct phase-space quadrature), classifies nonvanishing
//! with error margins, and cross-checks everything against a desk-scale
//! finite-difference operator laboratory.

pub mod criterion;
pub mod fiber;
pub mod operator_lab;
pub mod poly;
pub mod quad;
pub mod symbol;

mod error;

pub use error::Error;
pub use num_complex::Complex64;

pub type Result<T> = std::result::Result<T, Error>;
