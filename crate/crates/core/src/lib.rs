//! Quadtree coarsening of pixelized multiphase microstructures, plane-strain
//! finite element solves under KUBC, periodic and Neumann coupling, and
//! recovery-based energy-norm error estimation.
//!
//! The typical flow is
//!
//! 1. load a [`PhaseGrid`] from a PGM, PNG or CSV raster,
//! 2. build the uniform pixel mesh and coarsen it with [`mesh::coarsen_pipeline`],
//! 3. solve a [`fe::LoadCase`] on each mesh,
//! 4. recover nodal stresses ([`recovery`]) and estimate the error
//!    ([`error_analysis`]), optionally against a refined reference solve,
//! 5. compute homogenized tensors ([`homogenize`]) and export fields ([`export`]).

pub mod error;
pub mod error_analysis;
pub mod export;
pub mod fe;
pub mod grid;
pub mod homogenize;
pub mod mesh;
pub mod recovery;

pub use error::{Error, Result};
pub use grid::{Palette, PhaseGrid};
pub use mesh::QuadMesh;

/// Voigt 3-vector: `[xx, yy, xy]`. Strains carry engineering shear `γ_xy`.
pub type Voigt = [f64; 3];
