//! Numerical laboratory for Ricci flow stability on periodic grids.

pub mod curvature;
mod error;
pub mod grid;
pub mod lab;
pub mod flows;
pub mod spectral;

pub use error::{Error, Result};
