//! Numerical laboratory for a multi-part swimmer in an incompressible fluid.
//!
//! The fluid obeys the Navier-Stokes equations with no-slip walls on a box;
//! each body part is a translate of one reference shape that moves with the
//! average fluid velocity inside it, and the parts drive the fluid through
//! internal rotational and elastic forces weighted by scalar controls.

pub mod config;
pub mod controllability;
pub mod error;
pub mod field;
pub mod fluid;
pub mod forces;
pub mod model;
pub mod poisson;
pub mod projlab;
pub mod sensitivity;
pub mod simulator;
pub mod winding;
mod quadrature;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
