//! Pseudo-spectral laboratory for `u_t + D^{a+1} u_x + u u_x = 0`.
//!
//! Fields live on a periodic box standing in for the real line; see
//! [`grid`] for the Fourier normalization used throughout.

pub mod error;
pub mod evolution;
pub mod field;
pub mod functionals;
pub mod grid;
pub mod pairs;
mod quad;
pub mod spectral;
pub mod stein;
pub mod warning;

pub use error::{Error, Result};
pub use field::Field;
pub use grid::{make_grid, Grid, GridDescription};
pub use spectral::DispersionParams;
pub use warning::{Warning, WarningKind};
