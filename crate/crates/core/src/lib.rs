//! poreperm: synthesize binary porous media, compute ground-truth permeability
//! with a lattice-Boltzmann solver, turn pore-grain boundaries into point
//! clouds, and learn permeability from those clouds with a point-cloud
//! regression network trained by hand-rolled backpropagation.
//!
//! Module map:
//! - [`grid`]: domains, scalar fields, voxel grids, percolation.
//! - [`mediagen`]: truncated-Gaussian medium synthesis.
//! - [`lbm`]: D2Q9/D3Q19 BGK flow solver and Darcy permeability.
//! - [`pointcloud`]: boundary extraction, size resampling, normalization.
//! - [`net`]: the point-cloud regression network (forward + exact backward).
//! - [`train`]: losses, Adam, schedules, dataset splits, the training loop.
//! - [`eval`]: R^2 and relative-error metrics over a test split.
//! - [`io`]: binary file formats and the dataset manifest.

pub mod error;
pub mod eval;
pub mod grid;
pub mod io;
pub mod lbm;
pub mod mediagen;
pub mod net;
pub mod pointcloud;
pub mod train;

pub use error::{Error, Result};
