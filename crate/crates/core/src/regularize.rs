//! Dataset canonicalization: flatten every joint onto a single `base` root
//! and reduce each link to one visual and one collision mesh.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{load_obj, save_obj, GeometryError, TriMesh};
use crate::schema::BASE_LINK;
use crate::urdf::rotation::{is_rotation, rigid_inverse, rotation_part, translation_part};
use crate::urdf::{emit_urdf, matrix_to_rpy, parse_urdf, rest_pose, MeshRef, Pose, UrdfError, UrdfModel};

const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RegularizeError {
    #[error(transparent)]
    Urdf(#[from] UrdfError),
    #[error("rest transform of link {link:?} is not a rotation (orthonormality error {error:e})")]
    DecompositionFailure { link: String, error: f64 },
    #[error("mesh consolidation for link {link:?}: {source}")]
    Mesh {
        link: String,
        #[source]
        source: GeometryError,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshKind {
    Visual,
    Collision,
}

impl MeshKind {
    fn as_str(self) -> &'static str {
        match self {
            MeshKind::Visual => "visual",
            MeshKind::Collision => "collision",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsolidatedLink {
    pub link: String,
    pub kind: MeshKind,
    pub original_count: usize,
    /// Original entries, first one defining the kept local transform.
    pub sources: Vec<MeshRef>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizationReport {
    pub base_link: String,
    pub renamed_root: Option<String>,
    pub reparented_joints: Vec<String>,
    pub consolidated_links: Vec<ConsolidatedLink>,
}

/// Re-parents every joint onto the root (renamed `base`), replacing each
/// origin by the child's rest-pose transform, and keeps only the first
/// visual and collision entry per link. Joints already attached to the root
/// keep their origin verbatim, so flat models are a fixed point.
pub fn regularize(model: &UrdfModel) -> Result<(UrdfModel, RegularizationReport), RegularizeError> {
    let order = model.validate()?;
    let root = model.links[order.root].name.clone();
    if root != BASE_LINK && model.link(BASE_LINK).is_some() {
        return Err(UrdfError::SchemaViolation {
            path: format!("link {BASE_LINK:?}"),
            message: format!("root {root:?} cannot be renamed: a non-root link is already named {BASE_LINK:?}"),
        }
        .into());
    }
    let rest = rest_pose(model)?;
    let rename = |name: &str| {
        if name == root {
            BASE_LINK.to_string()
        } else {
            name.to_string()
        }
    };

    let mut out = model.clone();
    let mut reparented = Vec::new();
    for joint in &mut out.joints {
        if joint.parent != root {
            let frame = &rest[joint.child.as_str()];
            let rot = rotation_part(frame);
            if !is_rotation(&rot, ORTHONORMAL_TOL) {
                return Err(RegularizeError::DecompositionFailure {
                    link: joint.child.clone(),
                    error: crate::urdf::rotation::orthonormality_error(&rot),
                });
            }
            joint.origin = Pose::new(translation_part(frame), matrix_to_rpy(&rot));
            reparented.push(joint.id.clone());
        }
        joint.parent = BASE_LINK.to_string();
        joint.child = rename(&joint.child);
    }

    let mut consolidated = Vec::new();
    for link in &mut out.links {
        let original = link.name.clone();
        link.name = rename(&original);
        for kind in [MeshKind::Visual, MeshKind::Collision] {
            let entries = match kind {
                MeshKind::Visual => &mut link.visuals,
                MeshKind::Collision => &mut link.collisions,
            };
            if entries.len() > 1 {
                let sources = entries.clone();
                entries.truncate(1);
                entries[0].filename = merged_filename(&sources[0].filename, &link.name, kind);
                consolidated.push(ConsolidatedLink {
                    link: link.name.clone(),
                    kind,
                    original_count: sources.len(),
                    sources,
                });
            }
        }
    }

    let report = RegularizationReport {
        base_link: BASE_LINK.to_string(),
        renamed_root: (root != BASE_LINK).then_some(root),
        reparented_joints: reparented,
        consolidated_links: consolidated,
    };
    Ok((out, report))
}

fn merged_filename(first: &str, link: &str, kind: MeshKind) -> String {
    let name = format!("{link}_{}.obj", kind.as_str());
    match first.rfind('/') {
        Some(i) => format!("{}/{name}", &first[..i]),
        None => name,
    }
}

/// Concatenates OBJ sources into the local frame of the first entry.
pub fn merge_mesh_sources(sources: &[MeshRef], base_dir: &Path) -> Result<TriMesh, GeometryError> {
    let Some(first) = sources.first() else {
        return Err(GeometryError::InvalidMesh("no mesh sources".into()));
    };
    let to_first = rigid_inverse(&first.origin.to_matrix());
    let mut merged = TriMesh::default();
    for src in sources {
        let mesh = load_obj(&base_dir.join(&src.filename))?;
        merged.append(&mesh.transformed(&(to_first * src.origin.to_matrix())));
    }
    Ok(merged)
}

/// Keeps models with strictly fewer than `max_parts` articulated parts.
pub fn filter_by_part_count(models: Vec<UrdfModel>, max_parts: usize) -> Vec<UrdfModel> {
    models
        .into_iter()
        .filter(|m| m.articulated_part_count() < max_parts)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ObjectOutcome {
    Written { report: RegularizationReport },
    Filtered { articulated_parts: usize },
    Failed { error: String },
}

/// Regularizes every `<in_dir>/<id>/*.urdf` into `<out_dir>/<id>/`, copying
/// referenced meshes and writing merged OBJs for consolidated links plus a
/// `regularization.json` report. Objects are keyed by directory name.
pub fn regularize_dataset(
    in_dir: &Path,
    out_dir: &Path,
    max_parts: usize,
) -> Result<BTreeMap<String, ObjectOutcome>, RegularizeError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RegularizeError::Io { path, source }
    };
    let mut outcomes = BTreeMap::new();
    for entry in fs::read_dir(in_dir).map_err(io_err(in_dir))? {
        let entry = entry.map_err(io_err(in_dir))?;
        if !entry.path().is_dir() {
            continue;
        }
        let id = entry.file_name().to_string_lossy().into_owned();
        let Some(urdf_path) = find_urdf(&entry.path()).map_err(io_err(&entry.path()))? else {
            continue;
        };
        let outcome = match regularize_object(&urdf_path, &out_dir.join(&id), max_parts) {
            Ok(o) => o,
            Err(e) => ObjectOutcome::Failed { error: e.to_string() },
        };
        outcomes.insert(id, outcome);
    }
    Ok(outcomes)
}

pub(crate) fn find_urdf(dir: &Path) -> io::Result<Option<PathBuf>> {
    let mut found: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "urdf"))
        .collect();
    found.sort();
    Ok(found.into_iter().next())
}

fn regularize_object(
    urdf_path: &Path,
    out: &Path,
    max_parts: usize,
) -> Result<ObjectOutcome, RegularizeError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RegularizeError::Io { path, source }
    };
    let text = fs::read_to_string(urdf_path).map_err(io_err(urdf_path))?;
    let model = parse_urdf(&text)?.model;
    let parts = model.articulated_part_count();
    if parts >= max_parts {
        return Ok(ObjectOutcome::Filtered {
            articulated_parts: parts,
        });
    }
    let (regular, report) = regularize(&model)?;
    let src_dir = urdf_path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(out).map_err(io_err(out))?;

    let merged: HashMap<(&str, MeshKind), &ConsolidatedLink> = report
        .consolidated_links
        .iter()
        .map(|c| ((c.link.as_str(), c.kind), c))
        .collect();
    for link in &regular.links {
        for (kind, entries) in [(MeshKind::Visual, &link.visuals), (MeshKind::Collision, &link.collisions)] {
            for mesh in entries {
                let rel = safe_relative(&mesh.filename).ok_or_else(|| {
                    UrdfError::schema(
                        format!("link {:?}", link.name),
                        format!("mesh path {:?} must be relative and stay inside the object", mesh.filename),
                    )
                })?;
                let dest = out.join(&rel);
                if let Some(parent) = dest.parent() {
                    fs::create_dir_all(parent).map_err(io_err(parent))?;
                }
                if let Some(c) = merged.get(&(link.name.as_str(), kind)) {
                    for s in &c.sources {
                        safe_relative(&s.filename).ok_or_else(|| {
                            UrdfError::schema(format!("link {:?}", link.name), "unsafe mesh path")
                        })?;
                    }
                    let mesh = merge_mesh_sources(&c.sources, src_dir).map_err(|source| {
                        RegularizeError::Mesh {
                            link: link.name.clone(),
                            source,
                        }
                    })?;
                    save_obj(&mesh, &dest).map_err(|source| RegularizeError::Mesh {
                        link: link.name.clone(),
                        source,
                    })?;
                } else {
                    let src = src_dir.join(&rel);
                    fs::copy(&src, &dest).map_err(io_err(&src))?;
                }
            }
        }
    }
    let file_name = urdf_path.file_name().unwrap_or("mobility.urdf".as_ref());
    let xml = emit_urdf(&regular)?;
    let dest = out.join(file_name);
    fs::write(&dest, xml).map_err(io_err(&dest))?;
    let json = serde_json::to_string_pretty(&report).expect("serializable");
    let dest = out.join("regularization.json");
    fs::write(&dest, json).map_err(io_err(&dest))?;
    Ok(ObjectOutcome::Written { report })
}

fn safe_relative(name: &str) -> Option<PathBuf> {
    let p = Path::new(name);
    p.components()
        .all(|c| matches!(c, Component::Normal(_) | Component::CurDir))
        .then(|| p.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::urdf::{JointSpec, JointType, Limit, LinkSpec};
    use nalgebra::Matrix4;

    fn joint(id: &str, ty: JointType, parent: &str, child: &str, origin: Pose) -> JointSpec {
        JointSpec {
            id: id.into(),
            joint_type: ty,
            parent: parent.into(),
            child: child.into(),
            origin,
            axis: [0.0, 0.0, 1.0],
            limit: ty.requires_limit().then_some(Limit { lower: -1.0, upper: 1.0 }),
        }
    }

    fn chain() -> UrdfModel {
        let mut m = UrdfModel::new("chain");
        for n in ["root", "a", "b"] {
            m.links.push(LinkSpec::with_mesh(n, format!("{n}.obj")));
        }
        m.joints.push(joint("j1", JointType::Revolute, "root", "a", Pose::new([0.1, 0.2, 0.3], [0.3, -0.2, 0.9])));
        m.joints.push(joint("j2", JointType::Prismatic, "a", "b", Pose::new([0.5, -0.1, 0.0], [1.1, 0.4, -0.6])));
        m
    }

    fn max_abs_diff(a: &Matrix4<f64>, b: &Matrix4<f64>) -> f64 {
        (a - b).abs().max()
    }

    #[test]
    fn chain_origin_is_product_of_origins() {
        let m = chain();
        let (r, report) = regularize(&m).unwrap();
        let o1 = m.joints[0].origin.to_matrix();
        let o2 = m.joints[1].origin.to_matrix();
        assert!(max_abs_diff(&r.joints[1].origin.to_matrix(), &(o1 * o2)) < 1e-12);
        assert_eq!(r.joints[1].parent, "base");
        assert_eq!(report.reparented_joints, vec!["j2"]);
        assert_eq!(report.renamed_root.as_deref(), Some("root"));
        assert_eq!(r.links[0].name, "base");
        assert_eq!(r.joints[1].joint_type, JointType::Prismatic);
        assert_eq!(r.joints[1].limit, m.joints[1].limit);
    }

    #[test]
    fn flat_model_is_fixed_point_and_idempotent() {
        let (once, _) = regularize(&chain()).unwrap();
        let (twice, report) = regularize(&once).unwrap();
        assert_eq!(once, twice);
        assert!(report.reparented_joints.is_empty());
        assert!(report.renamed_root.is_none());
    }

    #[test]
    fn rename_collision_is_schema_violation() {
        let mut m = chain();
        m.links[2].name = "base".into();
        m.joints[1].child = "base".into();
        assert!(matches!(
            regularize(&m),
            Err(RegularizeError::Urdf(UrdfError::SchemaViolation { .. }))
        ));
    }

    #[test]
    fn two_visuals_are_consolidated() {
        let mut m = chain();
        m.links[1].visuals.push(MeshRef {
            filename: "parts/extra.obj".into(),
            origin: Pose::new([0.0, 0.0, 1.0], [0.0; 3]),
        });
        m.links[1].visuals[0].filename = "parts/a.obj".into();
        m.links[1].visuals[0].origin = Pose::new([0.2, 0.0, 0.0], [0.0, 0.0, 0.5]);
        let (r, report) = regularize(&m).unwrap();
        assert_eq!(r.links[1].visuals.len(), 1);
        assert_eq!(r.links[1].visuals[0].filename, "parts/a_visual.obj");
        assert_eq!(r.links[1].visuals[0].origin, m.links[1].visuals[0].origin);
        assert_eq!(report.consolidated_links.len(), 1);
        assert_eq!(report.consolidated_links[0].link, "a");
        assert_eq!(report.consolidated_links[0].original_count, 2);
    }

    #[test]
    fn filter_is_strict() {
        let m = chain();
        assert_eq!(m.articulated_part_count(), 2);
        assert_eq!(filter_by_part_count(vec![m.clone()], 3).len(), 1);
        assert!(filter_by_part_count(vec![m], 2).is_empty());
        assert!(filter_by_part_count(vec![], 8).is_empty());
    }

    #[test]
    fn merged_mesh_lives_in_first_frame() {
        let dir = tempfile::tempdir().unwrap();
        let cube = TriMesh::cuboid([0.0; 3], [0.5; 3]);
        save_obj(&cube, &dir.path().join("c.obj")).unwrap();
        let first = Pose::new([1.0, 0.0, 0.0], [0.0, 0.0, 0.0]);
        let second = Pose::new([1.0, 0.0, 2.0], [0.0, 0.0, 0.0]);
        let sources = vec![
            MeshRef { filename: "c.obj".into(), origin: first },
            MeshRef { filename: "c.obj".into(), origin: second },
        ];
        let merged = merge_mesh_sources(&sources, dir.path()).unwrap();
        assert_eq!(merged.faces.len(), 24);
        let (lo, hi) = merged.aabb().unwrap();
        assert!((lo[2] + 0.5).abs() < 1e-12 && (hi[2] - 2.5).abs() < 1e-12);
    }
}
