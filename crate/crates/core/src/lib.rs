//! Identity-free RGBA makeup masks.
//!
//! The crate covers the whole mask life cycle: unsupervised extraction of eye
//! makeup from a reference photo ([`extract`]), procedural synthesis of paired
//! training data ([`synth`]), per-frame application to video ([`video`]),
//! reference loss kernels with gradient checks ([`losses`]) and a synthetic
//! transfer benchmark ([`metrics`]).

pub mod color;
pub mod error;
pub mod extract;
pub mod geometry;
pub mod image;
pub mod losses;
pub mod metrics;
pub mod parsing;
pub mod raster;
pub mod synth;
pub mod synthetic;
pub mod video;

pub use error::{Error, Result};
