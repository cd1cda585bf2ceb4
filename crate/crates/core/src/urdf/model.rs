use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use super::rotation::{homogeneous, rpy_to_matrix};
use super::UrdfError;
use crate::util::norm3;

/// Tolerance on `‖axis‖ − 1` for joints that carry a direction.
pub const AXIS_UNIT_TOL: f64 = 1e-6;

/// Placeholder inertial values for links that do not declare one.
pub const DEFAULT_MASS: f64 = 1.0;
pub const DEFAULT_INERTIA_DIAG: [f64; 3] = [1e-3, 1e-3, 1e-3];

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    /// Translation in meters.
    pub xyz: [f64; 3],
    /// Roll, pitch, yaw in radians (fixed-axis XYZ).
    pub rpy: [f64; 3],
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        xyz: [0.0; 3],
        rpy: [0.0; 3],
    };

    pub fn new(xyz: [f64; 3], rpy: [f64; 3]) -> Self {
        Pose { xyz, rpy }
    }

    pub fn is_finite(&self) -> bool {
        self.xyz.iter().chain(self.rpy.iter()).all(|v| v.is_finite())
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        homogeneous(&rpy_to_matrix(self.rpy), self.xyz)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointType {
    Prismatic,
    Revolute,
    Continuous,
    Floating,
    Planar,
    Fixed,
}

impl JointType {
    pub const ALL: [JointType; 6] = [
        JointType::Prismatic,
        JointType::Revolute,
        JointType::Continuous,
        JointType::Floating,
        JointType::Planar,
        JointType::Fixed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            JointType::Prismatic => "prismatic",
            JointType::Revolute => "revolute",
            JointType::Continuous => "continuous",
            JointType::Floating => "floating",
            JointType::Planar => "planar",
            JointType::Fixed => "fixed",
        }
    }

    /// Joints whose motion is parameterised by a direction vector.
    pub fn uses_axis(self) -> bool {
        matches!(
            self,
            JointType::Prismatic | JointType::Revolute | JointType::Continuous | JointType::Planar
        )
    }

    pub fn requires_limit(self) -> bool {
        matches!(self, JointType::Prismatic | JointType::Revolute)
    }

    pub fn is_fixed(self) -> bool {
        self == JointType::Fixed
    }
}

impl fmt::Display for JointType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for JointType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        JointType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown joint type {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Limit {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub id: String,
    pub joint_type: JointType,
    pub parent: String,
    pub child: String,
    pub origin: Pose,
    pub axis: [f64; 3],
    pub limit: Option<Limit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshRef {
    /// Path relative to the URDF file's directory (or absolute).
    pub filename: String,
    pub origin: Pose,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inertial {
    pub origin: Pose,
    pub mass: f64,
    pub inertia_diag: [f64; 3],
}

impl Default for Inertial {
    fn default() -> Self {
        Inertial {
            origin: Pose::IDENTITY,
            mass: DEFAULT_MASS,
            inertia_diag: DEFAULT_INERTIA_DIAG,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub name: String,
    pub visuals: Vec<MeshRef>,
    pub collisions: Vec<MeshRef>,
    pub inertial: Inertial,
}

impl LinkSpec {
    pub fn new(name: impl Into<String>) -> Self {
        LinkSpec {
            name: name.into(),
            visuals: Vec::new(),
            collisions: Vec::new(),
            inertial: Inertial::default(),
        }
    }

    /// Link with the same mesh used for visual and collision geometry.
    pub fn with_mesh(name: impl Into<String>, filename: impl Into<String>) -> Self {
        let mesh = MeshRef {
            filename: filename.into(),
            origin: Pose::IDENTITY,
        };
        LinkSpec {
            visuals: vec![mesh.clone()],
            collisions: vec![mesh],
            ..LinkSpec::new(name)
        }
    }

    pub fn visual_mesh(&self) -> Option<&MeshRef> {
        self.visuals.first()
    }

    pub fn collision_mesh(&self) -> Option<&MeshRef> {
        self.collisions.first()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreeDefect {
    Cycle,
    MultipleRoots,
    DanglingLink,
    DuplicateLink,
    MultipleParents,
}

impl fmt::Display for TreeDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TreeDefect::Cycle => "cycle",
            TreeDefect::MultipleRoots => "multiple roots",
            TreeDefect::DanglingLink => "dangling link",
            TreeDefect::DuplicateLink => "duplicate link",
            TreeDefect::MultipleParents => "multiple parents",
        })
    }
}

/// Links and joints forming a rooted kinematic tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UrdfModel {
    pub name: String,
    pub links: Vec<LinkSpec>,
    pub joints: Vec<JointSpec>,
}

/// Result of a successful tree check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeOrder {
    pub root: usize,
    /// Joint indices in breadth-first order from the root; every joint
    /// appears after the joint that produces its parent link.
    pub joints: Vec<usize>,
}

impl UrdfModel {
    pub fn new(name: impl Into<String>) -> Self {
        UrdfModel {
            name: name.into(),
            links: Vec::new(),
            joints: Vec::new(),
        }
    }

    pub fn link(&self, name: &str) -> Option<&LinkSpec> {
        self.links.iter().find(|l| l.name == name)
    }

    pub fn joint(&self, id: &str) -> Option<&JointSpec> {
        self.joints.iter().find(|j| j.id == id)
    }

    /// Name of the root link, if the model forms a valid tree.
    pub fn root(&self) -> Option<&str> {
        self.tree_order()
            .ok()
            .map(|order| self.links[order.root].name.as_str())
    }

    /// Number of distinct links driven by a non-fixed joint.
    pub fn articulated_part_count(&self) -> usize {
        self.joints
            .iter()
            .filter(|j| !j.joint_type.is_fixed())
            .map(|j| j.child.as_str())
            .collect::<HashSet<_>>()
            .len()
    }

    /// Checks the parent→child relation: unique link names, resolvable
    /// references, one parent per link, a single root, no cycles.
    pub fn tree_order(&self) -> Result<TreeOrder, UrdfError> {
        let mut index: HashMap<&str, usize> = HashMap::with_capacity(self.links.len());
        for (i, link) in self.links.iter().enumerate() {
            if index.insert(link.name.as_str(), i).is_some() {
                return Err(UrdfError::tree(
                    TreeDefect::DuplicateLink,
                    format!("link {:?} declared more than once", link.name),
                ));
            }
        }
        let mut parent_joint: Vec<Option<usize>> = vec![None; self.links.len()];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); self.links.len()];
        for (ji, joint) in self.joints.iter().enumerate() {
            let lookup = |name: &str| {
                index.get(name).copied().ok_or_else(|| {
                    UrdfError::tree(
                        TreeDefect::DanglingLink,
                        format!("joint {:?} references unknown link {:?}", joint.id, name),
                    )
                })
            };
            let p = lookup(&joint.parent)?;
            let c = lookup(&joint.child)?;
            if p == c {
                return Err(UrdfError::tree(
                    TreeDefect::Cycle,
                    format!("joint {:?} connects link {:?} to itself", joint.id, joint.child),
                ));
            }
            if let Some(other) = parent_joint[c] {
                return Err(UrdfError::tree(
                    TreeDefect::MultipleParents,
                    format!(
                        "link {:?} is the child of both {:?} and {:?}",
                        joint.child, self.joints[other].id, joint.id
                    ),
                ));
            }
            parent_joint[c] = Some(ji);
            children[p].push(ji);
        }
        let roots: Vec<usize> = (0..self.links.len())
            .filter(|&i| parent_joint[i].is_none())
            .collect();
        let root = match roots.as_slice() {
            [] if self.links.is_empty() => {
                return Err(UrdfError::tree(TreeDefect::MultipleRoots, "model has no links"))
            }
            [] => {
                return Err(UrdfError::tree(
                    TreeDefect::Cycle,
                    "every link has a parent; the joint graph contains a cycle",
                ))
            }
            [r] => *r,
            many => {
                let names: Vec<&str> = many.iter().map(|&i| self.links[i].name.as_str()).collect();
                return Err(UrdfError::tree(
                    TreeDefect::MultipleRoots,
                    format!("links {names:?} have no parent; the model is disconnected"),
                ));
            }
        };
        let mut order = Vec::with_capacity(self.joints.len());
        let mut queue = VecDeque::from([root]);
        while let Some(link) = queue.pop_front() {
            for &ji in &children[link] {
                order.push(ji);
                queue.push_back(index[self.joints[ji].child.as_str()]);
            }
        }
        if order.len() != self.joints.len() {
            let reached: HashSet<usize> = order.iter().copied().collect();
            let stray = (0..self.joints.len()).find(|j| !reached.contains(j)).unwrap();
            return Err(UrdfError::tree(
                TreeDefect::Cycle,
                format!(
                    "joint {:?} is not reachable from root {:?}; the joint graph contains a cycle",
                    self.joints[stray].id, self.links[root].name
                ),
            ));
        }
        Ok(TreeOrder {
            root,
            joints: order,
        })
    }

    /// Per-element invariants that do not depend on the tree shape.
    pub fn check_parameters(&self) -> Result<(), UrdfError> {
        let mut ids = HashSet::new();
        for link in &self.links {
            let path = format!("link[{}]", link.name);
            if link.name.is_empty() {
                return Err(UrdfError::schema("link", "link name is empty"));
            }
            let inertial = &link.inertial;
            if !(inertial.mass.is_finite() && inertial.mass > 0.0) {
                return Err(UrdfError::schema(
                    format!("{path}/inertial/mass"),
                    format!("mass must be positive, got {}", inertial.mass),
                ));
            }
            if !inertial.origin.is_finite() || inertial.inertia_diag.iter().any(|v| !v.is_finite())
            {
                return Err(UrdfError::schema(format!("{path}/inertial"), "non-finite value"));
            }
            for (kind, meshes) in [("visual", &link.visuals), ("collision", &link.collisions)] {
                for mesh in meshes.iter() {
                    if !mesh.origin.is_finite() {
                        return Err(UrdfError::schema(
                            format!("{path}/{kind}/origin"),
                            "non-finite value",
                        ));
                    }
                }
            }
        }
        for joint in &self.joints {
            let path = format!("joint[{}]", joint.id);
            if !ids.insert(joint.id.as_str()) {
                return Err(UrdfError::schema(path, "joint id declared more than once"));
            }
            check_joint_parameters(joint, &path)?;
        }
        Ok(())
    }

    /// Full invariant check: parameters first, then the tree.
    pub fn validate(&self) -> Result<TreeOrder, UrdfError> {
        self.check_parameters()?;
        self.tree_order()
    }
}

pub(crate) fn check_joint_parameters(joint: &JointSpec, path: &str) -> Result<(), UrdfError> {
    if !joint.origin.is_finite() {
        return Err(UrdfError::schema(format!("{path}/origin"), "non-finite value"));
    }
    if joint.axis.iter().any(|v| !v.is_finite()) {
        return Err(UrdfError::schema(format!("{path}/axis"), "non-finite value"));
    }
    if joint.joint_type.uses_axis() {
        let n = norm3(joint.axis);
        if (n - 1.0).abs() > AXIS_UNIT_TOL {
            let msg = if n == 0.0 {
                format!("zero axis on {} joint", joint.joint_type)
            } else {
                format!("axis norm {n} is not unit")
            };
            return Err(UrdfError::schema(format!("{path}/axis"), msg));
        }
    }
    if joint.joint_type.requires_limit() {
        match joint.limit {
            None => {
                return Err(UrdfError::schema(
                    format!("{path}/limit"),
                    format!("{} joint requires a limit", joint.joint_type),
                ))
            }
            Some(l) if !(l.lower.is_finite() && l.upper.is_finite() && l.lower <= l.upper) => {
                return Err(UrdfError::schema(
                    format!("{path}/limit"),
                    format!("invalid limit [{}, {}]", l.lower, l.upper),
                ))
            }
            Some(_) => {}
        }
    }
    Ok(())
}
