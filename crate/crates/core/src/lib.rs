//! Discrete-velocity solver for the spatially homogeneous Boltzmann equation
//! with soft-potential collision kernels, together with the moment, Sobolev
//! and Povzner diagnostics used to check a priori bounds numerically.
//!
//! The numerical core is generic over the scalar type ([`Real`], implemented
//! for `f32` and `f64`); the aliases at the crate root fix it to `f64`.

pub mod collision;
pub mod diagnostics;
pub mod equilibrium;
pub mod error;
pub mod grid;
pub mod integrator;
pub mod kernel;
pub mod quadrature;
pub mod scalar;
pub mod snapshot;
pub mod verification;

pub use collision::{
    post_collision, CollisionOperator, CollisionParts, CollisionTables, InterpolationMode, TableEntry,
};
pub use equilibrium::{conserved_vector, macroscopic_moments, maxwellian, ConservedVector, MacroState};
pub use error::{Error, Result};
pub use grid::{interpolate, DistributionFunction, VelocityGrid};
pub use kernel::{
    validate_kernel, AngularLaw, CheckStatus, CollisionKernel, HypothesisCheck, KineticLaw, Tabulated, ValidationReport,
};
pub use quadrature::SphereRule;
pub use scalar::Real;

pub type Grid = VelocityGrid<f64>;
pub type Distribution = DistributionFunction<f64>;
pub type Kernel = CollisionKernel<f64>;
pub type Operator = CollisionOperator<f64>;
pub type Tables = CollisionTables<f64>;
pub type State = MacroState<f64>;
