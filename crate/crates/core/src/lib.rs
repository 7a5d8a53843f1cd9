//! f-divergences between densities of multivariate location and scale families.

pub mod error;
pub mod estimators;
pub mod cli;
pub mod closed_form;
pub mod generators;
pub mod mc;
pub mod quadrature;
pub mod radial;
pub mod spd;
pub mod spectral;
pub mod special;
pub mod tabulate;

pub use error::{Error, Result};
