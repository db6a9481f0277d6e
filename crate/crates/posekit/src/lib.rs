//! Deterministic substrate for two-stage 6-DoF object pose estimation.
//!
//! The crate covers everything around the learned networks of a
//! classify-then-regress pose pipeline that is exactly computable and
//! testable on a desk:
//!
//! - [`geometry`] — rotations, poses, camera intrinsics, the
//!   scale-invariant translation encoding and perspective-correction
//!   features, and two-stage pose composition.
//! - [`so3grid`] — uniform rotation prototypes from HEALPix sphere pixels
//!   lifted through the Hopf fibration, plus nearest-bucket assignment.
//! - [`symlabels`] — meshes, symmetry sets, the symmetry-aware pose
//!   distance, and soft classification labels for rotation and
//!   translation.
//! - [`losses`] — the focal / disentangled-regression / mask loss terms
//!   with analytic gradients where closed forms exist.
//! - [`correlation`] — the windowed real-vs-rendered feature correlation
//!   kernel and the multiscale concatenation channel contract.
//! - [`render`] — a minimal pinhole z-buffer depth rasterizer.
//! - [`metrics`] — VSD / MSSD / MSPD / ADD(-S) / AUC pose errors and
//!   average-recall aggregation.
//! - [`bopio`] — mesh, symmetry, ground-truth and result-file I/O in the
//!   BOP dataset conventions.
//!
//! All functions are pure and safe to call concurrently; units are
//! millimeters, pixels and radians throughout.

pub mod bopio;
pub mod correlation;
pub mod error;
pub mod geometry;
pub mod losses;
pub mod metrics;
pub mod render;
pub mod so3grid;
pub mod symlabels;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use geometry::{
    compose_pose, geodesic_angle, matrix_to_rot6d, perspective_features, rot6d_to_matrix,
    site_decode, site_encode, BBox, CameraIntrinsics, Pose, Rot6D, Rotation, SiteCoords, Stage,
};
pub use so3grid::{healpix_centers, nearest_bucket, so3_prototypes, S2Grid, SO3Grid};
pub use symlabels::{
    hard_label, object_diameter, pose_distance_symm, rotation_soft_labels, translation_soft_labels,
    Mesh, RotationSoftLabels, SymmetrySet, SymmetryTransform, TranslationSoftLabels,
};
