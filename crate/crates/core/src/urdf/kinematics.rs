use std::collections::HashMap;

use indexmap::IndexMap;
use nalgebra::Matrix4;

use super::model::{JointSpec, JointType, UrdfModel};
use super::rotation::{axis_angle, homogeneous};
use super::UrdfError;
use crate::Warning;

/// World transforms of every link, in model link order.
#[derive(Clone, Debug, PartialEq)]
pub struct Kinematics {
    pub poses: IndexMap<String, Matrix4<f64>>,
    pub warnings: Vec<Warning>,
}

/// Transform contributed by a joint's motion at configuration `q`
/// (applied after the joint origin).
pub fn joint_motion(joint: &JointSpec, q: f64) -> Matrix4<f64> {
    match joint.joint_type {
        JointType::Revolute | JointType::Continuous => {
            homogeneous(&axis_angle(joint.axis, q), [0.0; 3])
        }
        JointType::Prismatic => {
            let a = joint.axis;
            Matrix4::new_translation(&nalgebra::Vector3::new(a[0] * q, a[1] * q, a[2] * q))
        }
        JointType::Fixed | JointType::Floating | JointType::Planar => Matrix4::identity(),
    }
}

/// `T_world(child) = T_world(parent) · T(origin) · Motion(joint, q)`, with the
/// root at identity.
///
/// Revolute, continuous and prismatic joints need a value in `q`; revolute and
/// prismatic values must lie inside the joint limit. Floating and planar joints
/// are held at identity and reported as unsupported motion.
pub fn forward_kinematics(
    model: &UrdfModel,
    q: &HashMap<String, f64>,
) -> Result<Kinematics, UrdfError> {
    let order = model.tree_order()?;
    let mut warnings = Vec::new();
    let mut world: HashMap<&str, Matrix4<f64>> = HashMap::with_capacity(model.links.len());
    world.insert(model.links[order.root].name.as_str(), Matrix4::identity());
    for &ji in &order.joints {
        let joint = &model.joints[ji];
        let motion = match joint.joint_type {
            JointType::Fixed => Matrix4::identity(),
            JointType::Floating | JointType::Planar => {
                warnings.push(Warning::new(
                    format!("joint[{}]", joint.id),
                    format!("unsupported motion for {} joint; held at identity", joint.joint_type),
                ));
                Matrix4::identity()
            }
            _ => {
                let value = *q
                    .get(&joint.id)
                    .ok_or_else(|| UrdfError::MissingConfiguration(joint.id.clone()))?;
                if let Some(limit) = joint.limit.filter(|_| joint.joint_type.requires_limit()) {
                    if !(value >= limit.lower && value <= limit.upper) {
                        return Err(UrdfError::LimitViolation {
                            joint: joint.id.clone(),
                            value,
                            lower: limit.lower,
                            upper: limit.upper,
                        });
                    }
                }
                joint_motion(joint, value)
            }
        };
        let parent = world[joint.parent.as_str()];
        world.insert(joint.child.as_str(), parent * joint.origin.to_matrix() * motion);
    }
    let poses = model
        .links
        .iter()
        .map(|l| (l.name.clone(), world[l.name.as_str()]))
        .collect();
    Ok(Kinematics { poses, warnings })
}

/// Zero-configuration link transforms: each link's frame is the product of
/// joint origins along its chain. No limit checks are applied.
pub fn rest_pose(model: &UrdfModel) -> Result<IndexMap<String, Matrix4<f64>>, UrdfError> {
    let order = model.tree_order()?;
    let mut world: HashMap<&str, Matrix4<f64>> = HashMap::with_capacity(model.links.len());
    world.insert(model.links[order.root].name.as_str(), Matrix4::identity());
    for &ji in &order.joints {
        let joint = &model.joints[ji];
        let frame = world[joint.parent.as_str()] * joint.origin.to_matrix();
        world.insert(joint.child.as_str(), frame);
    }
    Ok(model
        .links
        .iter()
        .map(|l| (l.name.clone(), world[l.name.as_str()]))
        .collect())
}

/// Rest-pose world frame of every joint (parent frame times origin), tolerant
/// of malformed graphs: unknown parents and cycles fall back to identity.
pub fn rest_joint_frames(joints: &[JointSpec]) -> Vec<Matrix4<f64>> {
    let by_child: HashMap<&str, usize> = joints
        .iter()
        .enumerate()
        .map(|(i, j)| (j.child.as_str(), i))
        .collect();
    let mut memo: Vec<Option<Matrix4<f64>>> = vec![None; joints.len()];
    for start in 0..joints.len() {
        // Walk up the chain collecting unresolved joints, then fold back down.
        let mut chain = vec![start];
        let mut base = Matrix4::identity();
        loop {
            let current = *chain.last().unwrap();
            if let Some(frame) = memo[current] {
                chain.pop();
                base = frame;
                break;
            }
            match by_child.get(joints[current].parent.as_str()) {
                Some(&up) if !chain.contains(&up) => chain.push(up),
                _ => break,
            }
        }
        for &ji in chain.iter().rev() {
            base *= joints[ji].origin.to_matrix();
            memo[ji] = Some(base);
        }
    }
    memo.into_iter().map(|m| m.unwrap_or_else(Matrix4::identity)).collect()
}
