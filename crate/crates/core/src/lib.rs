//! Non-neural core of an articulated-object digital-twin pipeline.
//!
//! The crate covers the path from a structured articulation prediction to a
//! simulator-loadable URDF and back to evaluation metrics:
//!
//! * [`urdf`]: data model, XML parsing/emission, tree validation, forward kinematics.
//! * [`schema`]: the articulation JSON contract (`joints` + `links` with `[SEG]` markers),
//!   assembly into a [`urdf::UrdfModel`], and a seeded mock predictor.
//! * [`regularize`]: re-parenting onto a single `base` root and mesh consolidation.
//! * [`geometry`]: point clouds, part masks, Chamfer distance, convex hull / alpha meshing, OBJ I/O.
//! * [`seg`]: the `[SEG]`-token mask decoder and its BCE + Dice loss.
//! * [`eval`]: segmentation, joint, and executability metrics plus report aggregation.
//! * [`views`]: camera viewpoint sets on a sphere.
//! * [`pipeline`]: the batch driver tying the pieces together.

pub mod eval;
pub mod geometry;
pub mod pipeline;
pub mod regularize;
pub mod schema;
pub mod seg;
pub mod synth;
pub mod urdf;
pub mod views;

mod diag;
mod util;
pub use diag::Warning;

pub use eval::{ExecutabilityVerdict, FailureCategory, JointErrors, SegmentationResult};
pub use geometry::{PartMask, PointCloud, TriMesh};
pub use seg::{PointFeatures, SegDecoderParams, SegTokenPair};
pub use schema::{ArticulationPrediction, LinkEntry, NoiseSpec};
pub use urdf::{JointSpec, JointType, Limit, LinkSpec, Pose, UrdfModel};
