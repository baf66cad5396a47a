//! Implicit dynamic cohesive fracture in two dimensions, solved by a
//! barrier method over a product of nonnegative-orthant and second-order
//! cones with trust-region Newton inner iterations.

pub mod assembly;
pub mod cone;
pub mod config;
pub mod element;
pub mod energy;
pub mod error;
pub mod material;
pub mod mesh;
pub mod output;
pub mod sparse;
pub mod stepper;
pub mod trustregion;

pub use error::{Error, Result};
