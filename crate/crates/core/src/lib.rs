//! Exterior-domain diffusion versus a point-source reduced model.
//!
//! The crate evaluates the heat kernel and its bounds ([`green`]), describes the
//! obstacle boundary ([`geometry`]), evaluates the point-source model
//! ([`pointsource`]), solves the exterior problem ([`exterior`]), computes the
//! mismatch functional and the a-priori bounds ([`estimates`]) and searches for
//! good source signals ([`matching`]). [`suite`] runs the acceptance checks.

pub mod error;
pub mod estimates;
pub mod experiment;
pub mod exterior;
pub mod geometry;
pub mod green;
pub mod matching;
pub mod pointsource;
pub mod quadrature;
pub mod suite;

pub use error::{Error, Result};

/// A point of the plane.
pub type Point = [f64; 2];
