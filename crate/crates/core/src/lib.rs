//! Spectral laboratory for second-order hyperbolic equations with
//! time-oscillating, space-rough coefficients on the torus.

pub mod coefficients;
pub mod energy;
pub mod error;
pub mod harness;
pub mod lp;
pub mod quadrature;
pub mod regularize;
pub mod solver;

pub use error::{Error, Result};
