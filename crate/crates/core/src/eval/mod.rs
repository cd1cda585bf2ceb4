//! Evaluation metrics: segmentation mIoU and count accuracy, joint
//! type/axis/origin errors, physical executability, and report aggregation.

mod executability;
mod hungarian;
mod joints;
mod report;
mod segmentation;

use thiserror::Error;

pub use executability::{
    check_executability, check_prediction_text, check_urdf_text, CheckRecord, ExecutabilityVerdict,
    FailureCategory, SweepConfig,
};
pub use hungarian::{assignment_cost, min_cost_assignment};
pub use joints::{
    axis_error, eval_joint_lists, eval_joints, match_joints, JointErrors, JointEvalOptions,
    JointPairError, MatchPolicy, Matching,
};
pub use report::{aggregate_report, EvalReport, ObjectRecord, Split, SplitMetrics, SuccessThresholds};
pub use segmentation::{eval_segmentation, iou, MaskMatch, SegmentationResult};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("axis has zero length")]
    ZeroAxis,
    #[error("object {key:?}: {message}")]
    KeyMismatch { key: String, message: String },
}
