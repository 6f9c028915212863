//! Expected exit times of Brownian motion and symmetric stable processes on
//! bounded domains, with numerical certificates for quantitative
//! expected-lifetime inequalities.
//!
//! Modules, roughly bottom-up:
//! - [`geometry`]: domains, volumes, boundary distances, the equal-volume ball
//! - [`field`]: grid-sampled scalar fields and their import/export
//! - [`brownian`]: torsion functions for generator Δ (closed forms, walk on
//!   spheres, grid Poisson solver, path simulation)
//! - [`stable`]: α-stable lifetimes and fractional seminorms
//! - [`level`]: distribution functions, layer-cake norms, rearrangement
//! - [`asymmetry`]: Fraenkel asymmetry
//! - [`certify`]: theorem certificates and sweeps

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymmetry;
pub mod brownian;
pub mod certify;
mod conv;
pub mod error;
pub mod field;
pub mod geometry;
pub mod level;
pub(crate) mod par;
pub mod rng;
pub mod stable;

pub use error::{Error, Result};
pub use field::{GridSpec, ScalarField};
pub use geometry::{Domain, EquivalentBall, Shape};
