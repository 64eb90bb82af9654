//! Numerical potential theory on uniform grids: Riesz and Bessel potentials,
//! `(alpha, s)`-capacities, Wolff potentials, Choquet integrals, weighted
//! function-space norms and an inequality-checking harness.

pub mod capacity;
pub mod convolution;
pub mod error;
pub mod families;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod params;
pub mod potential;
pub mod quad;
pub mod spaces;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{Field, Grid, Mask};
pub use params::{KernelKind, Params};
