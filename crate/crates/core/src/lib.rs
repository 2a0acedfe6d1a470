//! Simulation and verification toolkit for spinning Brownian motion: a
//! reflected diffusion `X` in a domain whose oblique reflection depends on a
//! spin `S` that only changes through boundary local time `L`,
//!
//! ```text
//! dX = sigma(X) dB + (n(X) + tau(X, S)) dL
//! dS = (g(X) - alpha(X) S) dL
//! ```
//!
//! Modules follow the workflow: [`domain`] geometry, coefficient [`fields`],
//! the stochastic [`integrator`], deterministic [`skorokhod`] drivers,
//! [`excursions`] away from the boundary, and [`stationary`] estimation
//! and verification.

pub mod domain;
pub mod error;
pub mod excursions;
pub mod fields;
pub mod integrator;
pub mod parallel;
pub mod presets;
pub mod skorokhod;
pub mod stationary;
mod vecmath;

pub use domain::{DomainSpec, Region, Wall};
pub use error::{Result, SbmError};
pub use fields::FieldSet;
pub use integrator::{simulate, SimConfig, Trajectory};
