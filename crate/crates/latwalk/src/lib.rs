//! Numerical laboratory for the variable-speed random walk on a power-law
//! weighted lattice: intrinsic metric, volumes, exact heat kernels via
//! uniformization, event-driven simulation, collision experiments, and a
//! harness that checks the model's Gaussian bounds and geometric
//! comparability claims at desk scale.

pub mod cli;
pub mod collide;
pub mod error;
pub mod kernel;
pub mod lattice;
pub mod metric;
pub mod verify;
pub mod walk;

pub use error::{Error, Result};
pub use lattice::{BoxRegion, LatticeParams, Site, DEFAULT_SITE_BUDGET};
