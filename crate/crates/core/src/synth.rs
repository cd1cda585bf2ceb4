//! Small synthetic articulated objects with cuboid meshes, laid out like a
//! PartNet-Mobility directory: `<dir>/<id>/mobility.urdf`, meshes under
//! `<dir>/<id>/meshes/`, and a `splits.json` labelling each id ID or OOD.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use crate::eval::Split;
use crate::geometry::{save_obj, TriMesh};
use crate::schema::{parse_prediction, BASE_LINK};
use crate::urdf::{emit_urdf, JointSpec, JointType, Limit, LinkSpec, MeshRef, Pose, UrdfModel};

/// The faucet prediction used as the running example of the output format.
pub const FAUCET_JSON: &str = include_str!("../data/faucet.json");

pub const URDF_NAME: &str = "mobility.urdf";

pub struct SyntheticObject {
    pub id: String,
    pub split: Split,
    pub model: UrdfModel,
    /// Mesh files relative to the object directory.
    pub meshes: Vec<(String, TriMesh)>,
}

struct Builder {
    model: UrdfModel,
    meshes: Vec<(String, TriMesh)>,
}

impl Builder {
    fn new(name: &str) -> Builder {
        Builder {
            model: UrdfModel::new(name),
            meshes: Vec::new(),
        }
    }

    fn link(&mut self, name: &str, boxes: &[([f64; 3], [f64; 3])]) -> &mut Self {
        let mut link = LinkSpec::new(name);
        for (k, &(center, half)) in boxes.iter().enumerate() {
            let file = if k == 0 {
                format!("meshes/{name}.obj")
            } else {
                format!("meshes/{name}_{k}.obj")
            };
            let mesh = MeshRef {
                filename: file.clone(),
                origin: Pose::IDENTITY,
            };
            link.visuals.push(mesh.clone());
            link.collisions.push(mesh);
            self.meshes.push((file, TriMesh::cuboid(center, half)));
        }
        self.model.links.push(link);
        self
    }

    #[allow(clippy::too_many_arguments)]
    fn joint(
        &mut self,
        id: &str,
        joint_type: JointType,
        parent: &str,
        child: &str,
        xyz: [f64; 3],
        rpy: [f64; 3],
        axis: [f64; 3],
        limit: Option<(f64, f64)>,
    ) -> &mut Self {
        self.model.joints.push(JointSpec {
            id: id.into(),
            joint_type,
            parent: parent.into(),
            child: child.into(),
            origin: Pose::new(xyz, rpy),
            axis,
            limit: limit.map(|(lower, upper)| Limit { lower, upper }),
        });
        self
    }

    fn finish(&mut self, id: &str, split: Split) -> SyntheticObject {
        SyntheticObject {
            id: id.into(),
            split,
            model: std::mem::replace(&mut self.model, UrdfModel::new("")),
            meshes: std::mem::take(&mut self.meshes),
        }
    }
}

fn faucet() -> SyntheticObject {
    let pred = parse_prediction(FAUCET_JSON).expect("faucet fixture parses");
    let mut b = Builder::new("faucet");
    b.model.links.push(LinkSpec::new(BASE_LINK));
    let shapes: [([f64; 3], [f64; 3]); 4] = [
        ([0.0, 0.0, 0.05], [0.03, 0.02, 0.05]),
        ([0.0, 0.0, 0.05], [0.03, 0.02, 0.05]),
        ([0.0, 0.08, 0.12], [0.03, 0.08, 0.15]),
        ([0.0, 0.0, 0.0], [0.6, 0.05, 0.08]),
    ];
    for (entry, shape) in pred.links.iter().zip(shapes) {
        b.link(&entry.link_name, &[shape]);
    }
    b.model.joints = pred.joints;
    b.finish("faucet", Split::Id)
}

fn cabinet() -> SyntheticObject {
    let mut b = Builder::new("cabinet");
    b.link("cabinet_body", &[([0.0, 0.0, 0.4], [0.3, 0.25, 0.4])])
        .link("drawer", &[([0.0, 0.0, 0.0], [0.02, 0.22, 0.08])])
        .link("door", &[([0.0, -0.12, 0.0], [0.01, 0.12, 0.25])])
        .link("door_handle", &[([0.0, 0.0, 0.0], [0.015, 0.01, 0.04])])
        .joint("drawer_slide", JointType::Prismatic, "cabinet_body", "drawer", [0.31, 0.0, 0.65], [0.0; 3], [1.0, 0.0, 0.0], Some((0.0, 0.3)))
        .joint("door_hinge", JointType::Revolute, "cabinet_body", "door", [0.31, 0.24, 0.3], [0.0; 3], [0.0, 0.0, 1.0], Some((0.0, 1.57)))
        .joint("handle_mount", JointType::Fixed, "door", "door_handle", [0.03, -0.2, 0.0], [0.0, 0.0, 0.3], [1.0, 0.0, 0.0], None);
    b.finish("cabinet", Split::Id)
}

fn laptop() -> SyntheticObject {
    let mut b = Builder::new("laptop");
    b.link("base", &[([0.0, 0.0, 0.01], [0.17, 0.12, 0.01])])
        .link("screen", &[([0.0, 0.12, 0.005], [0.17, 0.12, 0.005])])
        .joint("lid_hinge", JointType::Revolute, "base", "screen", [0.0, 0.12, 0.02], [1.5708, 0.0, 0.0], [1.0, 0.0, 0.0], Some((-1.9, 0.0)));
    b.finish("laptop", Split::Id)
}

fn lamp() -> SyntheticObject {
    let mut b = Builder::new("desk_lamp");
    b.link("foot", &[([0.0, 0.0, 0.015], [0.1, 0.1, 0.015])])
        .link("lower_arm", &[([0.0, 0.0, 0.15], [0.015, 0.015, 0.15])])
        .link("upper_arm", &[([0.0, 0.0, 0.12], [0.012, 0.012, 0.12])])
        .link("shade", &[([0.0, 0.0, -0.04], [0.06, 0.06, 0.04])])
        .joint("shoulder", JointType::Revolute, "foot", "lower_arm", [0.0, 0.0, 0.03], [0.0, 0.0, 0.4], [0.0, 1.0, 0.0], Some((-0.8, 0.8)))
        .joint("elbow", JointType::Revolute, "lower_arm", "upper_arm", [0.0, 0.0, 0.3], [0.0, 0.6, 0.0], [0.0, 1.0, 0.0], Some((-1.2, 1.2)))
        .joint("shade_swivel", JointType::Continuous, "upper_arm", "shade", [0.0, 0.0, 0.24], [0.3, -0.2, 0.1], [0.0, 0.0, 1.0], None);
    b.finish("desk_lamp", Split::Ood)
}

fn bucket() -> SyntheticObject {
    let mut b = Builder::new("bucket");
    b.link(
        "base",
        &[([0.0, 0.0, 0.12], [0.12, 0.12, 0.12]), ([0.0, 0.0, 0.245], [0.13, 0.13, 0.005])],
    )
    .link("handle", &[([0.0, 0.0, 0.08], [0.13, 0.005, 0.01])])
    .joint("handle_pivot", JointType::Revolute, "base", "handle", [0.0, 0.0, 0.2], [0.0; 3], [1.0, 0.0, 0.0], Some((-1.4, 1.4)));
    b.finish("bucket", Split::Ood)
}

/// Five objects covering a virtual root, a renamed root, nested chains and
/// a link with two visual meshes.
pub fn fixture_objects() -> Vec<SyntheticObject> {
    vec![faucet(), cabinet(), laptop(), lamp(), bucket()]
}

pub fn write_object(dir: &Path, obj: &SyntheticObject) -> io::Result<()> {
    let root = dir.join(&obj.id);
    fs::create_dir_all(root.join("meshes"))?;
    let xml = emit_urdf(&obj.model).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    fs::write(root.join(URDF_NAME), xml)?;
    for (file, mesh) in &obj.meshes {
        save_obj(mesh, &root.join(file)).map_err(|e| io::Error::other(e.to_string()))?;
    }
    Ok(())
}

/// Writes every object plus `splits.json`.
pub fn write_dataset(dir: &Path, objects: &[SyntheticObject]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut splits = BTreeMap::new();
    for obj in objects {
        write_object(dir, obj)?;
        splits.insert(obj.id.clone(), obj.split);
    }
    let json = serde_json::to_string_pretty(&splits).expect("serializable");
    fs::write(dir.join("splits.json"), json)
}
