pub mod annotations;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod graph;
pub mod pipeline;
pub mod ports;
pub mod raster;
pub mod refine;
pub mod synth;

pub use error::{Error, Result};
