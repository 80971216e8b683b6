//! Nonlocal diffusion on perforated domains.
//!
//! The crate discretizes convolution-kernel Dirichlet and Neumann problems on
//! uniform lattices, computes their first eigenvalues and covering lower
//! bounds, builds and solves the homogenized limit equations, and provides
//! finite-difference references for the local problems reached by kernel
//! rescaling.

pub mod conv;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod grid;
pub mod homogenize;
pub mod kernel;
pub mod linalg;
pub mod localref;
pub mod nonlocal;

pub use error::{Error, Result};
pub use geometry::{DomainMask, HoleShape, Label, LimitRegime, MaskQuadrature, PerforationSpec, WeakLimit};
pub use grid::{inner_product, l2_norm, restrict, Alignment, Grid, ScalarField};
pub use homogenize::{CoefficientField, CoefficientRole, LimitKind, LimitProblem, SweepRecord};
pub use kernel::{DiscreteMass, KernelSpec, Profile, RescaleMode, SampledKernel};
pub use nonlocal::{BoundaryCondition, CoveringCertificate, NonlocalOperator, SpectralResult};
