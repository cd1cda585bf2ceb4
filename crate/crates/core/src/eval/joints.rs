use serde::{Deserialize, Serialize};

use super::hungarian::min_cost_assignment;
use super::EvalError;
use crate::schema::ArticulationPrediction;
use crate::urdf::rotation::{transform_vector, translation_part};
use crate::urdf::{rest_joint_frames, JointSpec, JointType, UrdfModel};
use crate::util::{cross3, dot3, norm3, sub3};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchPolicy {
    ById,
    #[default]
    HungarianOrigin,
}

impl std::str::FromStr for MatchPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "by-id" => Ok(MatchPolicy::ById),
            "hungarian-origin" => Ok(MatchPolicy::HungarianOrigin),
            other => Err(format!("unknown match policy {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JointEvalOptions {
    pub policy: MatchPolicy,
    /// Origin error of revolute/continuous ground truth measured as the
    /// distance from the predicted origin to the ground-truth axis line.
    pub axis_line: bool,
    pub sign_invariant: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_gt: Vec<usize>,
}

impl Matching {
    fn from_pairs(pairs: Vec<(usize, usize)>, n_pred: usize, n_gt: usize) -> Matching {
        let unmatched_pred = (0..n_pred).filter(|i| !pairs.iter().any(|p| p.0 == *i)).collect();
        let unmatched_gt = (0..n_gt).filter(|j| !pairs.iter().any(|p| p.1 == *j)).collect();
        Matching {
            pairs,
            unmatched_pred,
            unmatched_gt,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointPairError {
    pub pred: String,
    pub gt: String,
    pub type_error: f64,
    pub axis_error: f64,
    pub origin_error: f64,
}

/// Per-object joint errors. `type_error` counts unmatched joints on either
/// side as wrong; axis and origin means cover matched pairs only and are
/// absent when nothing matched.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JointErrors {
    pub pairs: Vec<JointPairError>,
    pub unmatched_pred: Vec<String>,
    pub unmatched_gt: Vec<String>,
    pub type_error: Option<f64>,
    pub axis_error: Option<f64>,
    pub origin_error: Option<f64>,
}

impl JointErrors {
    /// Fraction of ground-truth joints matched with the right type and axis
    /// and origin errors within the given thresholds.
    pub fn success_rate(&self, axis_tol: f64, origin_tol: f64) -> Option<f64> {
        let n_gt = self.pairs.len() + self.unmatched_gt.len();
        if n_gt == 0 {
            return None;
        }
        let ok = self
            .pairs
            .iter()
            .filter(|p| p.type_error == 0.0 && p.axis_error <= axis_tol && p.origin_error <= origin_tol)
            .count();
        Some(ok as f64 / n_gt as f64)
    }
}

/// Angle between two axes in [0, π]; with `sign_invariant`, min(θ, π−θ).
pub fn axis_error(a: [f64; 3], b: [f64; 3], sign_invariant: bool) -> Result<f64, EvalError> {
    let (na, nb) = (norm3(a), norm3(b));
    if !(na > 0.0 && nb > 0.0 && na.is_finite() && nb.is_finite()) {
        return Err(EvalError::ZeroAxis);
    }
    let ua = a.map(|x| x / na);
    let ub = b.map(|x| x / nb);
    // atan2 keeps full precision near 0 and π, where arccos does not.
    let theta = norm3(cross3(ua, ub)).atan2(dot3(ua, ub));
    Ok(if sign_invariant {
        theta.min(std::f64::consts::PI - theta)
    } else {
        theta
    })
}

struct WorldJoint {
    origin: [f64; 3],
    axis: [f64; 3],
}

fn world_joints(joints: &[JointSpec]) -> Vec<WorldJoint> {
    rest_joint_frames(joints)
        .iter()
        .zip(joints)
        .map(|(f, j)| WorldJoint {
            origin: translation_part(f),
            axis: transform_vector(f, j.axis),
        })
        .collect()
}

pub fn match_joints(
    pred: &[JointSpec],
    gt: &[JointSpec],
    policy: MatchPolicy,
) -> Matching {
    let pairs = match policy {
        MatchPolicy::ById => pred
            .iter()
            .enumerate()
            .filter_map(|(i, p)| gt.iter().position(|g| g.id == p.id).map(|j| (i, j)))
            .collect(),
        MatchPolicy::HungarianOrigin => {
            let wp = world_joints(pred);
            let wg = world_joints(gt);
            let cost: Vec<Vec<f64>> = wp
                .iter()
                .map(|p| wg.iter().map(|g| norm3(sub3(p.origin, g.origin))).collect())
                .collect();
            min_cost_assignment(&cost)
        }
    };
    Matching::from_pairs(pairs, pred.len(), gt.len())
}

/// Joint type/axis/origin errors with axes and origins compared in the
/// rest-pose world frame, so nested and flattened trees are comparable.
pub fn eval_joints(
    pred: &ArticulationPrediction,
    gt: &UrdfModel,
    opts: &JointEvalOptions,
) -> JointErrors {
    eval_joint_lists(&pred.joints, &gt.joints, opts)
}

pub fn eval_joint_lists(pred: &[JointSpec], gt: &[JointSpec], opts: &JointEvalOptions) -> JointErrors {
    if pred.is_empty() || gt.is_empty() {
        return JointErrors {
            unmatched_pred: pred.iter().map(|j| j.id.clone()).collect(),
            unmatched_gt: gt.iter().map(|j| j.id.clone()).collect(),
            ..JointErrors::default()
        };
    }
    let matching = match_joints(pred, gt, opts.policy);
    let wp = world_joints(pred);
    let wg = world_joints(gt);
    let pairs: Vec<JointPairError> = matching
        .pairs
        .iter()
        .map(|&(i, j)| {
            let (p, g) = (&pred[i], &gt[j]);
            let axis = axis_error(wp[i].axis, wg[j].axis, opts.sign_invariant)
                .unwrap_or(std::f64::consts::PI);
            let along_line = opts.axis_line
                && matches!(g.joint_type, JointType::Revolute | JointType::Continuous);
            let origin = if along_line {
                point_line_distance(wp[i].origin, wg[j].origin, wg[j].axis)
            } else {
                norm3(sub3(wp[i].origin, wg[j].origin))
            };
            JointPairError {
                pred: p.id.clone(),
                gt: g.id.clone(),
                type_error: if p.joint_type == g.joint_type { 0.0 } else { 1.0 },
                axis_error: axis,
                origin_error: origin,
            }
        })
        .collect();
    let unmatched = matching.unmatched_pred.len() + matching.unmatched_gt.len();
    let n = pairs.len();
    let wrong_types: f64 = pairs.iter().map(|p| p.type_error).sum::<f64>() + unmatched as f64;
    let mean = |f: fn(&JointPairError) -> f64| {
        (n > 0).then(|| pairs.iter().map(f).sum::<f64>() / n as f64)
    };
    JointErrors {
        type_error: Some(wrong_types / (n + unmatched) as f64),
        axis_error: mean(|p| p.axis_error),
        origin_error: mean(|p| p.origin_error),
        unmatched_pred: matching.unmatched_pred.iter().map(|&i| pred[i].id.clone()).collect(),
        unmatched_gt: matching.unmatched_gt.iter().map(|&j| gt[j].id.clone()).collect(),
        pairs,
    }
}

fn point_line_distance(p: [f64; 3], on_line: [f64; 3], dir: [f64; 3]) -> f64 {
    let len = norm3(dir);
    if len == 0.0 {
        return norm3(sub3(p, on_line));
    }
    norm3(cross3(sub3(p, on_line), dir)) / len
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::urdf::{Limit, Pose};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn joint(id: &str, ty: JointType, xyz: [f64; 3], axis: [f64; 3]) -> JointSpec {
        JointSpec {
            id: id.into(),
            joint_type: ty,
            parent: "base".into(),
            child: format!("link_{id}"),
            origin: Pose::new(xyz, [0.0; 3]),
            axis,
            limit: ty.requires_limit().then_some(Limit { lower: 0.0, upper: 1.0 }),
        }
    }

    #[test]
    fn axis_error_examples() {
        assert_eq!(axis_error([0.0, 1.0, 0.0], [0.0, 1.0, 0.0], false).unwrap(), 0.0);
        assert!((axis_error([0.0, 1.0, 0.0], [1.0, 0.0, 0.0], false).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(axis_error([0.0, 1.0, 0.0], [0.0, -1.0, 0.0], false).unwrap(), PI);
        assert_eq!(axis_error([0.0, 1.0, 0.0], [0.0, -1.0, 0.0], true).unwrap(), 0.0);
        assert!(matches!(axis_error([0.0; 3], [1.0, 0.0, 0.0], false), Err(EvalError::ZeroAxis)));
    }

    #[test]
    fn axis_error_symmetric_and_scale_free() {
        let a = [0.3, -1.2, 0.4];
        let b = [2.0, 0.1, -0.7];
        let e = axis_error(a, b, false).unwrap();
        assert!((e - axis_error(b, a, false).unwrap()).abs() < 1e-15);
        assert!((e - axis_error(a.map(|x| 7.5 * x), b, false).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn hungarian_origin_recovers_shuffled_ids() {
        let gt = vec![
            joint("a", JointType::Revolute, [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
            joint("b", JointType::Prismatic, [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]),
        ];
        let mut pred = vec![gt[1].clone(), gt[0].clone()];
        pred[0].id = "x".into();
        pred[1].id = "y".into();
        let e = eval_joint_lists(&pred, &gt, &JointEvalOptions::default());
        assert_eq!(e.type_error, Some(0.0));
        assert_eq!(e.axis_error, Some(0.0));
        assert_eq!(e.origin_error, Some(0.0));
        let by_id = eval_joint_lists(&pred, &gt, &JointEvalOptions { policy: MatchPolicy::ById, ..Default::default() });
        assert_eq!(by_id.type_error, Some(1.0));
        assert_eq!(by_id.axis_error, None);
    }

    #[test]
    fn unmatched_joints_count_as_type_errors() {
        let gt = vec![
            joint("a", JointType::Revolute, [0.0; 3], [0.0, 0.0, 1.0]),
            joint("b", JointType::Fixed, [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]),
        ];
        let pred = vec![gt[0].clone()];
        let e = eval_joint_lists(&pred, &gt, &JointEvalOptions::default());
        assert_eq!(e.type_error, Some(0.5));
        assert_eq!(e.unmatched_gt, vec!["b"]);
        assert_eq!(e.success_rate(0.1, 0.1), Some(0.5));
    }

    #[test]
    fn axis_line_distance_ignores_sliding() {
        let gt = vec![joint("a", JointType::Revolute, [0.0; 3], [0.0, 0.0, 1.0])];
        let mut pred = gt.clone();
        pred[0].origin.xyz = [0.0, 0.0, 3.0];
        let plain = eval_joint_lists(&pred, &gt, &JointEvalOptions::default());
        assert_eq!(plain.origin_error, Some(3.0));
        let line = eval_joint_lists(&pred, &gt, &JointEvalOptions { axis_line: true, ..Default::default() });
        assert_eq!(line.origin_error, Some(0.0));
    }

    #[test]
    fn empty_sides_give_empty_aggregate() {
        let gt = vec![joint("a", JointType::Revolute, [0.0; 3], [0.0, 0.0, 1.0])];
        let e = eval_joint_lists(&[], &gt, &JointEvalOptions::default());
        assert_eq!(e.type_error, None);
        assert_eq!(e.unmatched_gt.len(), 1);
    }
}
