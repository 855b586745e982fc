//! Numerical laboratory for the active scalar equation
//! `∂tρ + g R_aρ·∇ρ = 0` in ℝⁿ.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod fft;
pub mod field;
pub mod grid;
pub mod inequality;
pub mod nd_dynamics;
pub mod params;
pub mod profile;
pub mod quadrature;
pub mod radial_dynamics;
pub mod runner;
pub mod special;
pub mod sweep;
pub mod transform;

pub use error::{Error, Result};
pub use field::{ScalarField, VectorField};
pub use grid::Grid;
pub use params::Params;
pub use profile::{bump_initial_data, Bump, RadialFunction, RadialProfile};
