//! Differentiable voxel projection.
//!
//! Occupancy grids in `[0,1]` are rendered into silhouette, depth and
//! part-segmentation images by accumulating occupancy along orthographic
//! rays with an exponential falloff. Every renderer has an analytic
//! backward pass (vector-Jacobian product), which is enough to recover
//! shapes from images by plain gradient descent — see [`recon`].
//!
//! The crate is `no_std` + `alloc`; file formats and the command line
//! live in the companion `voxproj` crate.

#![no_std]
#![deny(unsafe_code)]
// `!(x > 0.0)` guards reject NaN along with non-positive values; the
// suggested `x <= 0.0` would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod grid;
pub mod mesh;
pub mod metrics;
pub mod project;
pub mod recon;
pub mod rng;
pub mod rotate;
pub mod view;

pub use error::{Error, Result};
pub use grid::{annotate_viewpoint, GridGradient, Image, ImageGradient, SemanticImage, VoxelGrid};
pub use project::{
    accessibility, grad_check, project_depth, project_semantic, project_silhouette, project_vjp,
    render_views, AccessibilityField, ProjectionKind, Rendering,
};
pub use recon::{evaluate_recon, reconstruct, visual_hull, ReconProblem, ReconReport, ReconTarget};
pub use rotate::{rotate_grid, rotate_grid_vjp};
pub use view::{ProjectionConfig, Resampling, Viewpoint, ViewpointSet};
