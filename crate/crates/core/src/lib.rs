//! Ray-traced multipath channel clusters and their super-resolution along a
//! receiver route.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! 1. [`scene`] builds box-world scenes, transmitter sites and receiver routes.
//! 2. [`raytracer`] traces line-of-sight, specular (image method) and
//!    single-bounce scattered rays for every receiver snapshot.
//! 3. [`clustering`] groups rays into object clusters, tracks them along the
//!    route and cuts 17-snapshot samples with a fixed number of cluster slots.
//! 4. [`dataset`] down-samples those windows into low/high resolution pairs,
//!    splits them and fits normalization statistics.
//! 5. [`interp`] is the distance-weighted linear interpolation baseline.
//! 6. [`mll`] is the residual multi-layer model trained with Adam.
//! 7. [`metrics`] scores predictions; [`cir`] rebuilds impulse responses.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and plain iterators otherwise. Results are
//! identical either way.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cir;
pub mod clustering;
pub mod dataset;
pub mod error;
pub mod geom;
pub mod interp;
pub mod io;
pub mod metrics;
pub mod mll;
pub mod par;
pub mod pipeline;
pub mod raytracer;
pub mod scene;

pub use error::{Error, Result};
pub use geom::Vec3;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Number of consecutive snapshots in one sample window.
pub const WINDOW: usize = 17;

/// Features per cluster slot: center x, y, z and power in dBm.
pub const FEATURES: usize = 4;
