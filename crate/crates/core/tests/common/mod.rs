#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::Matrix4;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use artictwin_core::urdf::{Inertial, JointSpec, JointType, Limit, LinkSpec, MeshRef, Pose, UrdfModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub struct TreeShape {
    pub links: usize,
    pub max_depth: usize,
    /// Allow floating/planar joints and names needing XML escapes.
    pub exotic: bool,
}

fn unit<R: Rng>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            return v.map(|x| x / n);
        }
    }
}

fn pose<R: Rng>(rng: &mut R) -> Pose {
    let mut c = || rng.random_range(-1.0..1.0);
    Pose::new([c(), c(), c()], [3.0 * c(), 1.5 * c(), 3.0 * c()])
}

/// Random valid model: link 0 is the root, every later link hangs off an
/// earlier one whose depth is below `max_depth`.
pub fn random_model<R: Rng>(rng: &mut R, shape: &TreeShape) -> UrdfModel {
    let name = |i: usize, exotic: bool| if exotic && i % 3 == 1 { format!("part<{i}>&\"x\"") } else { format!("link_{i}") };
    let mut model = UrdfModel::new(if shape.exotic { "fuzz & 'model'" } else { "fuzz" });
    let mut depth = vec![0usize];
    for i in 0..shape.links {
        let mut link = LinkSpec::new(name(i, shape.exotic));
        for k in 0..rng.random_range(0..3) {
            let mesh = MeshRef {
                filename: format!("meshes/l{i}_{k}.obj"),
                origin: if rng.random_bool(0.5) { Pose::IDENTITY } else { pose(rng) },
            };
            link.visuals.push(mesh.clone());
            if rng.random_bool(0.7) {
                link.collisions.push(mesh);
            }
        }
        link.inertial = Inertial {
            origin: pose(rng),
            mass: rng.random_range(0.01..10.0),
            inertia_diag: [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)],
        };
        model.links.push(link);
        if i == 0 {
            continue;
        }
        let candidates: Vec<usize> = (0..i).filter(|&p| depth[p] < shape.max_depth).collect();
        let parent = candidates[rng.random_range(0..candidates.len())];
        depth.push(depth[parent] + 1);
        let types: &[JointType] = if shape.exotic {
            &JointType::ALL
        } else {
            &[JointType::Revolute, JointType::Prismatic, JointType::Continuous, JointType::Fixed]
        };
        let joint_type = types[rng.random_range(0..types.len())];
        let limit = if joint_type.requires_limit() {
            let lower = rng.random_range(-2.0..0.0);
            Some(Limit {
                lower,
                upper: lower + rng.random_range(0.1..3.0),
            })
        } else {
            None
        };
        model.joints.push(JointSpec {
            id: format!("joint_{i}"),
            joint_type,
            parent: model.links[parent].name.clone(),
            child: model.links[i].name.clone(),
            origin: pose(rng),
            axis: unit(rng),
            limit,
        });
    }
    // Shuffle joint order; the tree must not depend on it.
    for i in (1..model.joints.len()).rev() {
        let j = rng.random_range(0..=i);
        model.joints.swap(i, j);
    }
    model
}

/// Star model with `n` revolute joints on one root.
pub fn flat_model(n: usize) -> UrdfModel {
    let mut model = UrdfModel::new("flat");
    model.links.push(LinkSpec::new("base"));
    for i in 0..n {
        model.links.push(LinkSpec::new(format!("link_{i}")));
        model.joints.push(JointSpec {
            id: format!("joint_{i}"),
            joint_type: JointType::Revolute,
            parent: "base".into(),
            child: format!("link_{i}"),
            origin: Pose::new([i as f64 * 0.01, 0.0, 0.0], [0.0, 0.0, 0.1 * i as f64]),
            axis: [0.0, 0.0, 1.0],
            limit: Some(Limit { lower: -1.0, upper: 1.0 }),
        });
    }
    model
}

pub fn max_abs_diff(a: &Matrix4<f64>, b: &Matrix4<f64>) -> f64 {
    (a - b).abs().max()
}

/// Rest frames keyed by link name, with `renamed` mapping old names to new.
pub fn rest_frames(model: &UrdfModel) -> HashMap<String, Matrix4<f64>> {
    artictwin_core::urdf::rest_pose(model)
        .expect("valid model")
        .into_iter()
        .collect()
}
