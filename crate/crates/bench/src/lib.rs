//! Seeded inputs shared by the criterion benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use artictwin_core::urdf::{emit_urdf, JointSpec, JointType, Limit, LinkSpec, Pose, UrdfModel};

pub fn cloud(n: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)])
        .collect()
}

pub fn cost_matrix(rows: usize, cols: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..rows).map(|_| (0..cols).map(|_| r.random_range(0.0..1.0)).collect()).collect()
}

/// URDF text for a serial chain of `n` revolute joints.
pub fn chain_urdf(n: usize) -> String {
    let mut m = UrdfModel::new("chain");
    m.links.push(LinkSpec::with_mesh("base", "meshes/base.obj"));
    for i in 0..n {
        let parent = if i == 0 { "base".to_string() } else { format!("link_{}", i - 1) };
        m.links.push(LinkSpec::with_mesh(format!("link_{i}"), format!("meshes/link_{i}.obj")));
        m.joints.push(JointSpec {
            id: format!("joint_{i}"),
            joint_type: JointType::Revolute,
            parent,
            child: format!("link_{i}"),
            origin: Pose::new([0.0, 0.0, 0.1], [0.0, 0.2, 0.0]),
            axis: [0.0, 0.0, 1.0],
            limit: Some(Limit { lower: -1.0, upper: 1.0 }),
        });
    }
    emit_urdf(&m).expect("valid chain")
}
