//! Metric and homotopy structure of partial isometries in finite direct sums
//! of matrix corners.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: complex matrices, Jacobi eigensolver, SVD, functional calculus.
//! - [`operators`]: block operators, partial-isometry and extremality predicates.
//! - [`polar`]: canonical polar decomposition and spectral gaps.
//! - [`projection_geometry`]: canonical form of a projection pair.
//! - [`homotopy`]: certified paths of partial isometries.
//! - [`continuity`]: continuity points of the polar map.
//! - [`inequalities`]: the two norm inequalities, their equality cases and oracles.
//! - [`harness`]: seeded sweeps, galleries and reports driven by the CLI.

pub mod continuity;
pub mod error;
pub mod harness;
pub mod homotopy;
pub mod inequalities;
pub mod numerics;
pub mod operators;
pub mod polar;
pub mod projection_geometry;
pub mod random;

pub use error::{Error, Result};
pub use numerics::{op_norm, ComplexMatrix, ToleranceConfig, C64};
pub use operators::{BlockOperator, BlockShape, DefectPattern};
pub use polar::{polar_pi, PolarData};
pub use projection_geometry::FivePartDecomposition;
