use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::prediction::{ArticulationPrediction, LinkEntry, BASE_LINK};
use super::SchemaError;
use crate::urdf::{JointType, Limit, UrdfModel};
use crate::util::{cross3, norm3, rng};

/// Perturbations applied by [`mock_predict`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Every axis is rotated by exactly this angle about a random perpendicular.
    pub axis_tilt_rad: f64,
    /// Standard deviation of isotropic Gaussian noise on origin positions.
    pub origin_sigma_m: f64,
    pub type_flip_prob: f64,
    /// Probability that a joint and its child subtree are omitted.
    pub drop_part_prob: f64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), String> {
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        let prob = |v: f64| (0.0..=1.0).contains(&v);
        if !nonneg(self.axis_tilt_rad) {
            return Err(format!("axis_tilt_rad must be >= 0, got {}", self.axis_tilt_rad));
        }
        if !nonneg(self.origin_sigma_m) {
            return Err(format!("origin_sigma_m must be >= 0, got {}", self.origin_sigma_m));
        }
        if !prob(self.type_flip_prob) {
            return Err(format!("type_flip_prob must be in [0, 1], got {}", self.type_flip_prob));
        }
        if !prob(self.drop_part_prob) {
            return Err(format!("drop_part_prob must be in [0, 1], got {}", self.drop_part_prob));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        *self == NoiseSpec::default()
    }
}

const FLIP_TARGETS: [JointType; 4] = [
    JointType::Revolute,
    JointType::Prismatic,
    JointType::Continuous,
    JointType::Fixed,
];

/// Stand-in for the learned predictor: the JSON image of `gt`, perturbed
/// according to `noise`. Fully determined by `seed`.
///
/// Every joint consumes the same number of random draws regardless of the
/// noise settings, so changing one noise knob never reshuffles the others.
pub fn mock_predict(
    gt: &UrdfModel,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<ArticulationPrediction, SchemaError> {
    noise
        .validate()
        .map_err(|message| SchemaError::SchemaViolation {
            path: "noise".into(),
            message,
        })?;
    let order = gt.tree_order()?;
    let root = gt.links[order.root].name.as_str();
    let rename = |name: &str| {
        if name == root {
            BASE_LINK.to_string()
        } else {
            name.to_string()
        }
    };
    let mut rng = rng(seed);
    let mut dropped: HashSet<&str> = HashSet::new();
    let mut joints = vec![None; gt.joints.len()];
    for &ji in &order.joints {
        let src = &gt.joints[ji];
        let u_drop: f64 = rng.random();
        let u_flip: f64 = rng.random();
        let flip_pick: usize = rng.random_range(0..FLIP_TARGETS.len() - 1);
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        let gauss: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));

        if dropped.contains(src.parent.as_str()) || u_drop < noise.drop_part_prob {
            dropped.insert(src.child.as_str());
            continue;
        }
        let mut joint = src.clone();
        joint.parent = rename(&src.parent);
        if u_flip < noise.type_flip_prob {
            let choices: Vec<JointType> = FLIP_TARGETS
                .into_iter()
                .filter(|t| *t != src.joint_type)
                .collect();
            let to = choices[flip_pick.min(choices.len() - 1)];
            joint.joint_type = to;
            joint.limit = match to {
                JointType::Revolute => Some(Limit { lower: 0.0, upper: FRAC_PI_2 }),
                JointType::Prismatic => Some(Limit { lower: 0.0, upper: 0.5 }),
                _ => None,
            };
            if to.uses_axis() && norm3(joint.axis) == 0.0 {
                joint.axis = [0.0, 0.0, 1.0];
            }
        }
        if noise.axis_tilt_rad > 0.0 && norm3(joint.axis) > 0.0 {
            joint.axis = tilt(joint.axis, noise.axis_tilt_rad, phi);
        }
        if noise.origin_sigma_m > 0.0 {
            for k in 0..3 {
                joint.origin.xyz[k] += noise.origin_sigma_m * gauss[k];
            }
        }
        joints[ji] = Some(joint);
    }
    let links = gt
        .links
        .iter()
        .filter(|l| l.name != root && !dropped.contains(l.name.as_str()))
        .map(|l| LinkEntry::new(l.name.clone(), l.name.clone()))
        .collect();
    Ok(ArticulationPrediction {
        joints: joints.into_iter().flatten().collect(),
        links,
    })
}

/// Rotates unit-length `axis` by `angle` about the perpendicular direction
/// at azimuth `phi` in the plane orthogonal to `axis`.
fn tilt(axis: [f64; 3], angle: f64, phi: f64) -> [f64; 3] {
    let n = norm3(axis);
    let a = [axis[0] / n, axis[1] / n, axis[2] / n];
    // Any vector not parallel to `a` seeds the perpendicular basis.
    let seed = if a[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = normalize(cross3(a, seed));
    let e2 = cross3(a, e1);
    let (sp, cp) = phi.sin_cos();
    let u = [
        cp * e1[0] + sp * e2[0],
        cp * e1[1] + sp * e2[1],
        cp * e1[2] + sp * e2[2],
    ];
    let w = cross3(u, a);
    let (s, c) = angle.sin_cos();
    [
        a[0] * c + w[0] * s,
        a[1] * c + w[1] * s,
        a[2] * c + w[2] * s,
    ]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = norm3(v);
    [v[0] / n, v[1] / n, v[2] / n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::dot3;

    #[test]
    fn tilt_has_exact_angle() {
        for (k, axis) in [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.6, 0.0, 0.8]].into_iter().enumerate() {
            for &angle in &[0.05, 0.132, 0.5, 2.0] {
                let t = tilt(axis, angle, 0.7 * k as f64 + 0.3);
                assert!((norm3(t) - 1.0).abs() < 1e-15);
                let got = norm3(cross3(axis, t)).atan2(dot3(axis, t));
                assert!((got - angle).abs() < 1e-14, "{axis:?} {angle} {got}");
            }
        }
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseSpec::default().validate().is_ok());
        let bad = NoiseSpec { type_flip_prob: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = NoiseSpec { origin_sigma_m: -0.1, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
