//! URDF data model, XML reading/writing, tree validation and forward kinematics.

mod kinematics;
mod model;
pub mod rotation;
mod xml;

use thiserror::Error;

pub use kinematics::{forward_kinematics, joint_motion, rest_pose, rest_joint_frames, Kinematics};
pub use model::{
    Inertial, JointSpec, JointType, Limit, LinkSpec, MeshRef, Pose, TreeDefect, TreeOrder,
    UrdfModel, AXIS_UNIT_TOL, DEFAULT_INERTIA_DIAG, DEFAULT_MASS,
};
pub use rotation::{matrix_to_rpy, rpy_to_matrix};
pub use xml::{emit_urdf, parse_urdf, parse_urdf_unchecked, ParsedUrdf};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum UrdfError {
    #[error("malformed XML: {0}")]
    XmlSyntax(String),
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("tree violation ({defect}): {message}")]
    TreeViolation { defect: TreeDefect, message: String },
    #[error("model is not valid: {0}")]
    InvariantViolation(Box<UrdfError>),
    #[error("no configuration value for joint {0:?}")]
    MissingConfiguration(String),
    #[error("joint {joint:?} value {value} outside limit [{lower}, {upper}]")]
    LimitViolation {
        joint: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
}

impl UrdfError {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        UrdfError::SchemaViolation {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn tree(defect: TreeDefect, message: impl Into<String>) -> Self {
        UrdfError::TreeViolation {
            defect,
            message: message.into(),
        }
    }
}
