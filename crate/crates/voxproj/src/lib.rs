//! IO companion to `voxproj-core`: the VOXG grid format, binary PGM
//! images, OBJ mesh ingestion, dataset manifests, and the batch pipeline
//! behind the `voxproj` command line.

pub mod dataset;
pub mod error;
pub mod manifest;
pub mod obj;
pub mod pgm;
pub mod voxg;

pub use error::{Error, Result};
