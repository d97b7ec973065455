//! Globally divergence-free hybridizable discontinuous Galerkin discretization
//! of the stationary incompressible Navier-Stokes equations on triangle meshes.
//!
//! The velocity gradient `L = nu grad u` is an auxiliary unknown, velocity and
//! pressure carry single-valued edge traces, and the convective term is written
//! in skew-symmetric form so that every linearized (Oseen) step is stable.
//! The discrete velocity is exactly divergence-free and normal-continuous,
//! which makes the velocity error independent of the pressure.

pub mod analysis;
pub mod error;
pub mod femcore;
pub mod hdgforms;
pub mod mesh;
pub mod projections;
pub mod solver;
pub mod study;

pub use error::{HdgError, Result};
pub use hdgforms::{DofLayout, Example, FieldState};
pub use mesh::Mesh;
