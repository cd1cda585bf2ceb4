use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::load_obj;
use crate::schema::{assemble_unchecked, parse_prediction_with, AssembleOptions, ParseOptions, SchemaError};
use crate::urdf::rotation::{is_rotation, rotation_part, transform_point};
use crate::urdf::{forward_kinematics, parse_urdf_unchecked, JointType, UrdfError, UrdfModel};
use crate::util::norm3;

const ORTHONORMAL_TOL: f64 = 1e-6;
/// Reference radius used when no link carries a mesh.
const FALLBACK_RADIUS: f64 = 1.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureCategory {
    #[default]
    None,
    JsonFormat,
    TreeStructure,
    Parameter,
    Mesh,
    Motion,
}

impl FailureCategory {
    pub const FAILURES: [FailureCategory; 5] = [
        FailureCategory::JsonFormat,
        FailureCategory::TreeStructure,
        FailureCategory::Parameter,
        FailureCategory::Mesh,
        FailureCategory::Motion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureCategory::None => "none",
            FailureCategory::JsonFormat => "json-format",
            FailureCategory::TreeStructure => "tree-structure",
            FailureCategory::Parameter => "parameter",
            FailureCategory::Mesh => "mesh",
            FailureCategory::Motion => "motion",
        }
    }
}

impl fmt::Display for FailureCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    pub passed: bool,
    pub message: String,
}

impl CheckRecord {
    fn new(check: &str, passed: bool, message: impl Into<String>) -> Self {
        CheckRecord {
            check: check.to_string(),
            passed,
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutabilityVerdict {
    pub passed: bool,
    pub failure_category: FailureCategory,
    pub details: Vec<CheckRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub samples_per_joint: usize,
    pub bound_factor: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            samples_per_joint: 11,
            bound_factor: 10.0,
        }
    }
}

struct Checker {
    details: Vec<CheckRecord>,
}

impl Checker {
    fn pass(&mut self, check: &str, message: impl Into<String>) {
        self.details.push(CheckRecord::new(check, true, message));
    }

    fn fail(mut self, check: &str, category: FailureCategory, message: impl Into<String>) -> ExecutabilityVerdict {
        self.details.push(CheckRecord::new(check, false, message));
        ExecutabilityVerdict {
            passed: false,
            failure_category: category,
            details: self.details,
        }
    }
}

/// Loads a URDF (or a prediction JSON, assembled against `<link>.obj` files
/// beside it) and runs the ordered checks: parse, tree, parameters, meshes,
/// motion sweep. Only reading `path` itself can fail; every other problem
/// is reported as a verdict.
pub fn check_executability(path: &Path, sweep: &SweepConfig) -> io::Result<ExecutabilityVerdict> {
    let text = fs::read_to_string(path)?;
    let base_dir = path.parent().unwrap_or(Path::new("")).to_path_buf();
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    Ok(if is_json {
        check_prediction_text(&text, &base_dir, sweep)
    } else {
        check_urdf_text(&text, &base_dir, sweep)
    })
}

pub fn check_urdf_text(xml: &str, base_dir: &Path, sweep: &SweepConfig) -> ExecutabilityVerdict {
    let mut c = Checker { details: Vec::new() };
    let model = match parse_urdf_unchecked(xml) {
        Ok(parsed) => parsed.model,
        Err(e) => return c.fail("parse", FailureCategory::JsonFormat, e.to_string()),
    };
    c.pass("parse", "URDF parsed");
    check_model(c, &model, base_dir, sweep)
}

pub fn check_prediction_text(json: &str, base_dir: &Path, sweep: &SweepConfig) -> ExecutabilityVerdict {
    let mut c = Checker { details: Vec::new() };
    let opts = ParseOptions {
        defer_parameter_checks: true,
        ..ParseOptions::default()
    };
    let pred = match parse_prediction_with(json, opts) {
        Ok(p) => p.prediction,
        Err(e @ SchemaError::ConsistencyViolation { .. }) => {
            c.pass("parse", "JSON parsed");
            return c.fail("tree", FailureCategory::TreeStructure, e.to_string());
        }
        Err(e) => return c.fail("parse", FailureCategory::JsonFormat, e.to_string()),
    };
    c.pass("parse", "JSON parsed");
    let assemble = AssembleOptions {
        allow_missing_mesh: true,
        filename_prefix: Some(String::new()),
        ..AssembleOptions::default()
    };
    let model = match assemble_unchecked(&pred, base_dir, &assemble) {
        Ok(m) => m,
        Err(e) => return c.fail("parse", FailureCategory::JsonFormat, e.to_string()),
    };
    check_model(c, &model, base_dir, sweep)
}

fn check_model(mut c: Checker, model: &UrdfModel, base_dir: &Path, sweep: &SweepConfig) -> ExecutabilityVerdict {
    if let Err(e) = model.tree_order() {
        return c.fail("tree", FailureCategory::TreeStructure, e.to_string());
    }
    c.pass("tree", format!("{} links form a single rooted tree", model.links.len()));

    if let Err(e) = model.check_parameters() {
        return c.fail("parameters", FailureCategory::Parameter, e.to_string());
    }
    c.pass("parameters", "axes, limits and inertials are valid");

    let boxes = match link_boxes(model, base_dir) {
        Ok(b) => b,
        Err(msg) => return c.fail("meshes", FailureCategory::Mesh, msg),
    };
    c.pass("meshes", format!("{} mesh references load", boxes.mesh_count));

    match sweep_motion(model, &boxes, sweep) {
        Ok(msg) => c.pass("motion", msg),
        Err(msg) => return c.fail("motion", FailureCategory::Motion, msg),
    }
    c.pass(
        "scope",
        "kinematic sweep only: collisions, freezing and dynamics are not simulated",
    );
    ExecutabilityVerdict {
        passed: true,
        failure_category: FailureCategory::None,
        details: c.details,
    }
}

struct LinkBoxes {
    /// Link-frame corners of each link's mesh bounds, or the link origin.
    corners: HashMap<String, Vec<[f64; 3]>>,
    reference_radius: f64,
    mesh_count: usize,
}

fn resolve_mesh(base_dir: &Path, filename: &str) -> PathBuf {
    let stripped = filename.strip_prefix("package://").unwrap_or(filename);
    base_dir.join(stripped)
}

fn link_boxes(model: &UrdfModel, base_dir: &Path) -> Result<LinkBoxes, String> {
    let mut cache: HashMap<PathBuf, ([f64; 3], [f64; 3])> = HashMap::new();
    let mut corners = HashMap::new();
    let mut radius: f64 = 0.0;
    let mut mesh_count = 0;
    for link in &model.links {
        let mut pts = Vec::new();
        for mesh in link.visuals.iter().chain(&link.collisions) {
            let path = resolve_mesh(base_dir, &mesh.filename);
            let bounds = match cache.get(&path) {
                Some(b) => *b,
                None => {
                    let m = load_obj(&path).map_err(|e| format!("link {:?}: {e}", link.name))?;
                    let b = m
                        .aabb()
                        .ok_or_else(|| format!("link {:?}: mesh {} is empty", link.name, path.display()))?;
                    cache.insert(path, b);
                    b
                }
            };
            mesh_count += 1;
            let t = mesh.origin.to_matrix();
            let (lo, hi) = bounds;
            for k in 0..8 {
                let c = [
                    if k & 1 == 0 { lo[0] } else { hi[0] },
                    if k & 2 == 0 { lo[1] } else { hi[1] },
                    if k & 4 == 0 { lo[2] } else { hi[2] },
                ];
                let p = transform_point(&t, c);
                radius = radius.max(norm3(p));
                pts.push(p);
            }
        }
        if pts.is_empty() {
            pts.push([0.0; 3]);
        }
        corners.insert(link.name.clone(), pts);
    }
    if radius <= 0.0 {
        radius = FALLBACK_RADIUS;
    }
    Ok(LinkBoxes {
        corners,
        reference_radius: radius,
        mesh_count,
    })
}

fn rest_value(model: &UrdfModel, idx: usize) -> f64 {
    let j = &model.joints[idx];
    match (j.joint_type.requires_limit(), j.limit) {
        (true, Some(l)) => 0.0f64.clamp(l.lower, l.upper),
        _ => 0.0,
    }
}

fn samples(model: &UrdfModel, idx: usize, n: usize) -> Vec<f64> {
    let j = &model.joints[idx];
    let n = n.max(1);
    match j.joint_type {
        JointType::Continuous => (0..n)
            .map(|k| std::f64::consts::TAU * k as f64 / n as f64)
            .collect(),
        JointType::Revolute | JointType::Prismatic => {
            let l = j.limit.expect("limits were checked");
            if n == 1 {
                return vec![l.lower];
            }
            (0..n)
                .map(|k| (l.lower + (l.upper - l.lower) * k as f64 / (n - 1) as f64).min(l.upper))
                .collect()
        }
        _ => Vec::new(),
    }
}

fn check_pose(
    model: &UrdfModel,
    q: &HashMap<String, f64>,
    boxes: &LinkBoxes,
    bound: f64,
) -> Result<(), String> {
    let kin = forward_kinematics(model, q).map_err(|e: UrdfError| e.to_string())?;
    for (name, t) in &kin.poses {
        if !t.iter().all(|x| x.is_finite()) {
            return Err(format!("link {name:?} has a non-finite transform"));
        }
        if !is_rotation(&rotation_part(t), ORTHONORMAL_TOL) {
            return Err(format!("link {name:?} rotation is not orthonormal"));
        }
        for &c in &boxes.corners[name.as_str()] {
            let p = transform_point(t, c);
            let r = norm3(p);
            if !(r <= bound) {
                return Err(format!(
                    "link {name:?} reaches {r:e} m, beyond the {bound:e} m bound"
                ));
            }
        }
    }
    Ok(())
}

fn sweep_motion(model: &UrdfModel, boxes: &LinkBoxes, sweep: &SweepConfig) -> Result<String, String> {
    let bound = sweep.bound_factor * boxes.reference_radius;
    let mut q: HashMap<String, f64> = model
        .joints
        .iter()
        .enumerate()
        .map(|(i, j)| (j.id.clone(), rest_value(model, i)))
        .collect();
    check_pose(model, &q, boxes, bound).map_err(|e| format!("rest pose: {e}"))?;
    let mut evaluated = 1;
    for (i, j) in model.joints.iter().enumerate() {
        let values = samples(model, i, sweep.samples_per_joint);
        for &v in &values {
            q.insert(j.id.clone(), v);
            check_pose(model, &q, boxes, bound)
                .map_err(|e| format!("joint {:?} at {v}: {e}", j.id))?;
            evaluated += 1;
        }
        q.insert(j.id.clone(), rest_value(model, i));
    }
    Ok(format!(
        "{evaluated} configurations within {bound} m (reference radius {})",
        boxes.reference_radius
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{save_obj, TriMesh};
    use crate::urdf::{emit_urdf, JointSpec, Limit, LinkSpec, Pose};

    fn hinge_model() -> UrdfModel {
        let mut m = UrdfModel::new("box");
        m.links.push(LinkSpec::with_mesh("base", "base.obj"));
        m.links.push(LinkSpec::with_mesh("lid", "lid.obj"));
        m.joints.push(JointSpec {
            id: "hinge".into(),
            joint_type: JointType::Revolute,
            parent: "base".into(),
            child: "lid".into(),
            origin: Pose::new([0.0, 0.2, 0.1], [0.0; 3]),
            axis: [1.0, 0.0, 0.0],
            limit: Some(Limit { lower: 0.0, upper: 1.5 }),
        });
        m
    }

    fn write_meshes(dir: &Path) {
        save_obj(&TriMesh::cuboid([0.0; 3], [0.2, 0.2, 0.1]), &dir.join("base.obj")).unwrap();
        save_obj(&TriMesh::cuboid([0.0, -0.2, 0.01], [0.2, 0.2, 0.01]), &dir.join("lid.obj")).unwrap();
    }

    fn verdict(dir: &Path, name: &str, text: &str) -> ExecutabilityVerdict {
        let path = dir.join(name);
        fs::write(&path, text).unwrap();
        check_executability(&path, &SweepConfig::default()).unwrap()
    }

    #[test]
    fn each_defect_maps_to_its_category() {
        let dir = tempfile::tempdir().unwrap();
        write_meshes(dir.path());
        let clean = emit_urdf(&hinge_model()).unwrap();
        let ok = verdict(dir.path(), "clean.urdf", &clean);
        assert!(ok.passed, "{:?}", ok.details);
        assert_eq!(ok.failure_category, FailureCategory::None);

        let v = verdict(dir.path(), "xml.urdf", &clean[..clean.len() / 2]);
        assert_eq!(v.failure_category, FailureCategory::JsonFormat);
        let v = verdict(dir.path(), "bad.json", "{\"joints\": [");
        assert_eq!(v.failure_category, FailureCategory::JsonFormat);

        let xml = clean.replace(
            "</robot>",
            "<joint name=\"back\" type=\"fixed\"><parent link=\"lid\"/><child link=\"base\"/></joint></robot>",
        );
        let v = verdict(dir.path(), "cycle.urdf", &xml);
        assert_eq!(v.failure_category, FailureCategory::TreeStructure);

        let xml = clean.replace("<limit lower=\"0\" upper=\"1.5\"/>", "");
        assert_ne!(xml, clean);
        let v = verdict(dir.path(), "limit.urdf", &xml);
        assert_eq!(v.failure_category, FailureCategory::Parameter);

        let xml = clean.replace("lid.obj", "missing.obj");
        let v = verdict(dir.path(), "mesh.urdf", &xml);
        assert_eq!(v.failure_category, FailureCategory::Mesh);

        let mut far = hinge_model();
        far.joints[0].origin.xyz = [1e6, 0.0, 0.0];
        let v = verdict(dir.path(), "far.urdf", &emit_urdf(&far).unwrap());
        assert_eq!(v.failure_category, FailureCategory::Motion);
        assert!(!v.passed);
    }

    #[test]
    fn prediction_json_is_checked_against_sibling_meshes() {
        let dir = tempfile::tempdir().unwrap();
        write_meshes(dir.path());
        let pred = crate::schema::ArticulationPrediction {
            joints: hinge_model().joints,
            links: vec![crate::schema::LinkEntry::new("lid", "lid")],
        };
        let v = verdict(dir.path(), "pred.json", &pred.to_json());
        assert!(v.passed, "{:?}", v.details);
        let mut broken = pred.clone();
        broken.joints[0].axis = [0.0; 3];
        let v = verdict(dir.path(), "zero.json", &broken.to_json());
        assert_eq!(v.failure_category, FailureCategory::Parameter);
        let mut dangling = pred;
        dangling.joints[0].parent = "nowhere".into();
        let v = verdict(dir.path(), "dangling.json", &dangling.to_json());
        assert_eq!(v.failure_category, FailureCategory::TreeStructure);
    }

    #[test]
    fn sweep_samples_cover_the_range() {
        let m = hinge_model();
        let s = samples(&m, 0, 11);
        assert_eq!(s.len(), 11);
        assert_eq!(s[0], 0.0);
        assert_eq!(s[10], 1.5);
    }
}
