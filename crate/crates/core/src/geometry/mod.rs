//! Point clouds, part masks, meshing and mesh I/O.

mod chamfer;
mod cloud;
mod delaunay;
mod hull;
pub mod kdtree;
mod mesh;

use std::io;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chamfer::{chamfer_distance, chamfer_points, mesh_chamfer, MESH_SAMPLES};
pub use cloud::{
    load_cloud, load_masks, masks_to_json, parse_cloud, parse_masks, save_cloud, save_masks,
    CloudFormat, PartMask, PointCloud,
};
pub use delaunay::{alpha_shape, tetrahedralize};
pub use hull::convex_hull;
pub use mesh::{load_obj, parse_obj, save_obj, TriMesh};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("index {index} out of range for {len} points in mask {mask:?}")]
    IndexOutOfRange {
        mask: String,
        index: usize,
        len: usize,
    },
}

impl GeometryError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        GeometryError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        GeometryError::Parse {
            line,
            message: message.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum MeshMethod {
    #[default]
    ConvexHull,
    /// Boundary of the Delaunay tetrahedra whose circumradius is at most `radius`.
    Alpha { radius: f64 },
}

/// Meshes the points selected by `mask`.
pub fn points_to_mesh(
    cloud: &PointCloud,
    mask: &PartMask,
    method: MeshMethod,
) -> Result<TriMesh, GeometryError> {
    mask.check_bounds(cloud.len())?;
    let points: Vec<[f64; 3]> = mask.indices.iter().map(|&i| cloud.points[i]).collect();
    if points.len() < 4 {
        return Err(GeometryError::DegenerateGeometry(format!(
            "mask {:?} selects {} points; at least 4 are required",
            mask.part_name,
            points.len()
        )));
    }
    match method {
        MeshMethod::ConvexHull => convex_hull(&points),
        MeshMethod::Alpha { radius } => alpha_shape(&points, radius),
    }
}
