//! Numerical laboratory for the 2D Prandtl boundary-layer equations written
//! in terms of the good unknown `g = ω + (y/2⟨t⟩) u`.
pub mod banded;
pub mod config;
pub mod error;
pub mod goodunknown;
pub mod grid;
pub mod io;
pub mod lift;
pub mod norms;
pub mod radius;
pub mod solver;
pub mod spectral;
pub mod stencil;
pub mod verify;
pub use config::RunConfig;
pub use error::{Error, Result};
pub use grid::{bracket, make_grid, CoordMode, Field, Grid, GridConfig};
