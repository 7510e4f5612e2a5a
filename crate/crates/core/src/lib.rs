//! Recovery of rigid point-body geometry from orthographic multiframe
//! projections.
//!
//! * [`geometry`]: value types, projection, rigid motion, the
//!   degrees-of-freedom balance and per-frame depth embedding.
//! * [`solvers`]: closed-form recovery of squared lengths for three points
//!   over three or four frames and four points over three frames.
//! * [`two_frame`]: what two frames do allow: correspondence matching,
//!   rigidity tests and the one-parameter family of indistinguishable
//!   structures.
//! * [`scene_sim`]: seeded ground-truth scenes and noise.
//! * [`harness`]: file formats, reports and the noise study.

// `!(x > y)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod harness;
mod linalg;
pub mod scene_sim;
pub mod solvers;
pub mod two_frame;

pub use error::{Error, Result};
pub use geometry::{
    apply_motion, dof_balance, embed_depths, project, projected_sq_distances, DepthOffsets,
    DofBalance, FrameObservation, Point2, Point3, RigidMotion, TetraDistances, Tolerance,
    TriangleDistances,
};
pub use linalg::{quadratic_roots, solve_dense};
