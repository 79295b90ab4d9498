//! Visible-surface aligned radio map synthesis.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`scenegen`] builds a procedural Manhattan-grid city with per-surface
//!    materials and samples ground-level transmitter positions.
//! 2. [`render`] rasterizes pinhole views of the scene into pixel-aligned
//!    depth, normal, semantic, color and material buffers.
//! 3. [`vas`] lifts a depth buffer back into world space and triangulates the
//!    visible surface; its face centroids become receiver probes.
//! 4. [`radio`] traces deterministic propagation paths (line of sight, image
//!    method reflections, knife-edge diffraction, slab transmission) from a
//!    transmitter to every probe and rasterizes path gain and SINR back onto
//!    the image grid.
//!
//! [`orchestrate`] groups camera poses into perception communities,
//! [`analysis`] holds the statistics and image metrics, and [`datasetio`]
//! owns the on-disk formats and the campaign driver.

pub mod analysis;
pub mod datasetio;
pub mod error;
pub mod geometry;
pub mod orchestrate;
pub mod radio;
pub mod render;
pub mod scenegen;
pub mod seed;
pub mod vas;

pub use error::{Error, Result};
pub use geometry::Vec3;
