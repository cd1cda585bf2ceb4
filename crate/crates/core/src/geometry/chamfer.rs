use rayon::prelude::*;

use super::kdtree::KdTree;
use super::{GeometryError, PointCloud, TriMesh};
use crate::util::rng;

/// Surface samples drawn per mesh for mesh-to-mesh Chamfer distance.
pub const MESH_SAMPLES: usize = 10_000;

/// Symmetric Chamfer distance on xyz coordinates:
/// `mean_a min_b ‖a−b‖² + mean_b min_a ‖b−a‖²`.
pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> Result<f64, GeometryError> {
    chamfer_points(&a.points, &b.points)
}

pub fn chamfer_points(a: &[[f64; 3]], b: &[[f64; 3]]) -> Result<f64, GeometryError> {
    if a.is_empty() || b.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    Ok(one_sided(a, &KdTree::build(b)) + one_sided(b, &KdTree::build(a)))
}

fn one_sided(queries: &[[f64; 3]], tree: &KdTree) -> f64 {
    // Collect then sum sequentially so the result does not depend on thread count.
    let d: Vec<f64> = queries
        .par_iter()
        .map(|&q| tree.nearest(q).expect("non-empty tree").1)
        .collect();
    d.iter().sum::<f64>() / queries.len() as f64
}

/// Chamfer distance between two meshes from `samples` seeded area-weighted
/// surface points each.
pub fn mesh_chamfer(
    a: &TriMesh,
    b: &TriMesh,
    samples: usize,
    seed: u64,
) -> Result<f64, GeometryError> {
    let mut r = rng(seed);
    let pa = a.sample_surface(samples, &mut r);
    let pb = b.sample_surface(samples, &mut r);
    chamfer_points(&pa, &pb)
}
