//! Two-grid postprocessed Galerkin method for the 2D incompressible
//! Navier-Stokes equations on the unit square.
//!
//! The pipeline: evolve a mixed finite-element semidiscretization (mini or
//! Taylor-Hood elements) on a coarse mesh with the trapezoidal rule, then
//! improve the solution at a target time by solving one linear Oseen problem
//! on a finer mesh, with the coarse velocity as convecting wind and the
//! recovered coarse time derivative in the data. The classical variant
//! (a fine Stokes solve with the convection moved into the right-hand side)
//! is implemented alongside for comparison.

pub mod assembly;
pub mod error;
pub mod evolution;
pub mod experiments;
pub mod fe_basis;
pub mod fe_space;
pub mod mesh;
pub mod postprocess;
pub mod quadrature;
pub mod saddle;
pub mod sparse;

pub use assembly::{ConvectionMode, OperatorSet, Wind};
pub use error::{Error, Result};
pub use evolution::{EvolutionConfig, Forcing, GalerkinState};
pub use experiments::errors::{ErrorReport, SlopeTable};
pub use fe_space::{FEField, FESpacePair, Family, FieldRole};
pub use mesh::StructuredTriMesh;
pub use postprocess::{PostprocessMethod, PostprocessRequest};
pub use quadrature::QuadRule;
pub use saddle::{SaddleSolution, SaddleSystem};
pub use sparse::SparseMatrix;
