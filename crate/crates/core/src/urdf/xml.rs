use std::fmt::Write;

use roxmltree::{Document, Node};

use super::model::{Inertial, JointSpec, JointType, Limit, LinkSpec, MeshRef, Pose, UrdfModel};
use super::model::AXIS_UNIT_TOL;
use super::UrdfError;
use crate::util::norm3;
use crate::Warning;

/// A model together with the diagnostics collected while reading it.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedUrdf {
    pub model: UrdfModel,
    pub warnings: Vec<Warning>,
}

/// Reads a URDF document and checks every model invariant.
pub fn parse_urdf(xml_text: &str) -> Result<ParsedUrdf, UrdfError> {
    let parsed = parse_urdf_unchecked(xml_text)?;
    parsed.model.validate()?;
    Ok(parsed)
}

/// Reads a URDF document, failing only on malformed XML and on missing or
/// unparsable attributes. Tree shape and parameter invariants are left to
/// [`UrdfModel::validate`].
pub fn parse_urdf_unchecked(xml_text: &str) -> Result<ParsedUrdf, UrdfError> {
    let doc = Document::parse(xml_text).map_err(|e| UrdfError::XmlSyntax(e.to_string()))?;
    let robot = doc.root_element();
    if robot.tag_name().name() != "robot" {
        return Err(UrdfError::schema(
            robot.tag_name().name(),
            "root element must be <robot>",
        ));
    }
    let mut reader = Reader::default();
    let name = required_attr(robot, "name", "robot")?.to_string();
    let mut model = UrdfModel::new(name);
    for node in robot.children().filter(Node::is_element) {
        match node.tag_name().name() {
            "link" => model.links.push(reader.link(node)?),
            "joint" => model.joints.push(reader.joint(node)?),
            other => reader.warn(format!("robot/{other}"), "unsupported element ignored"),
        }
    }
    Ok(ParsedUrdf {
        model,
        warnings: reader.warnings,
    })
}

#[derive(Default)]
struct Reader {
    warnings: Vec<Warning>,
}

impl Reader {
    fn warn(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.warnings.push(Warning::new(path, message));
    }

    fn link(&mut self, node: Node) -> Result<LinkSpec, UrdfError> {
        let name = required_attr(node, "name", "link")?;
        let path = format!("link[{name}]");
        let mut link = LinkSpec::new(name);
        let mut inertial = None;
        for child in node.children().filter(Node::is_element) {
            match child.tag_name().name() {
                "visual" => {
                    if let Some(mesh) = self.mesh_entry(child, &format!("{path}/visual"))? {
                        link.visuals.push(mesh);
                    }
                }
                "collision" => {
                    if let Some(mesh) = self.mesh_entry(child, &format!("{path}/collision"))? {
                        link.collisions.push(mesh);
                    }
                }
                "inertial" => inertial = Some(self.inertial(child, &format!("{path}/inertial"))?),
                other => self.warn(format!("{path}/{other}"), "unsupported element ignored"),
            }
        }
        link.inertial = inertial.unwrap_or_default();
        Ok(link)
    }

    fn mesh_entry(&mut self, node: Node, path: &str) -> Result<Option<MeshRef>, UrdfError> {
        let mut origin = Pose::IDENTITY;
        let mut filename = None;
        for child in node.children().filter(Node::is_element) {
            match child.tag_name().name() {
                "origin" => origin = parse_origin(child, &format!("{path}/origin"))?,
                "geometry" => {
                    for shape in child.children().filter(Node::is_element) {
                        if shape.tag_name().name() == "mesh" {
                            let p = format!("{path}/geometry/mesh");
                            filename = Some(required_attr(shape, "filename", &p)?.to_string());
                            if shape.attribute("scale").is_some() {
                                self.warn(p, "mesh scale ignored");
                            }
                        } else {
                            self.warn(
                                format!("{path}/geometry/{}", shape.tag_name().name()),
                                "primitive geometry is not supported; entry ignored",
                            );
                        }
                    }
                }
                "material" => {}
                other => self.warn(format!("{path}/{other}"), "unsupported element ignored"),
            }
        }
        Ok(filename.map(|filename| MeshRef { filename, origin }))
    }

    fn inertial(&mut self, node: Node, path: &str) -> Result<Inertial, UrdfError> {
        let mut inertial = Inertial::default();
        for child in node.children().filter(Node::is_element) {
            let p = format!("{path}/{}", child.tag_name().name());
            match child.tag_name().name() {
                "origin" => inertial.origin = parse_origin(child, &p)?,
                "mass" => inertial.mass = parse_f64(required_attr(child, "value", &p)?, &p)?,
                "inertia" => {
                    for (k, key) in ["ixx", "iyy", "izz"].into_iter().enumerate() {
                        inertial.inertia_diag[k] = parse_f64(required_attr(child, key, &p)?, &p)?;
                    }
                    for key in ["ixy", "ixz", "iyz"] {
                        if let Some(v) = child.attribute(key) {
                            if parse_f64(v, &p)? != 0.0 {
                                self.warn(p.clone(), format!("off-diagonal {key} dropped"));
                            }
                        }
                    }
                }
                _ => self.warn(p, "unsupported element ignored"),
            }
        }
        Ok(inertial)
    }

    fn joint(&mut self, node: Node) -> Result<JointSpec, UrdfError> {
        let id = required_attr(node, "name", "joint")?.to_string();
        let path = format!("joint[{id}]");
        let type_text = required_attr(node, "type", &path)?;
        let joint_type: JointType = type_text
            .parse()
            .map_err(|e: String| UrdfError::schema(format!("{path}/@type"), e))?;
        let mut origin = Pose::IDENTITY;
        let mut parent = None;
        let mut child = None;
        let mut axis = [1.0, 0.0, 0.0];
        let mut limit = None;
        for el in node.children().filter(Node::is_element) {
            let p = format!("{path}/{}", el.tag_name().name());
            match el.tag_name().name() {
                "origin" => origin = parse_origin(el, &p)?,
                "parent" => parent = Some(required_attr(el, "link", &p)?.to_string()),
                "child" => child = Some(required_attr(el, "link", &p)?.to_string()),
                "axis" => axis = parse_triple(required_attr(el, "xyz", &p)?, &p)?,
                "limit" => {
                    let read = |key: &str| {
                        el.attribute(key)
                            .map(|v| parse_f64(v, &format!("{p}/@{key}")))
                            .transpose()
                            .map(|v| v.unwrap_or(0.0))
                    };
                    limit = Some(Limit {
                        lower: read("lower")?,
                        upper: read("upper")?,
                    });
                }
                other => self.warn(p, format!("<{other}> ignored")),
            }
        }
        let parent = parent.ok_or_else(|| UrdfError::schema(&path, "missing <parent>"))?;
        let child = child.ok_or_else(|| UrdfError::schema(&path, "missing <child>"))?;
        if joint_type == JointType::Continuous && limit.take().is_some() {
            self.warn(format!("{path}/limit"), "limit on continuous joint ignored");
        }
        if joint_type.uses_axis() {
            let n = norm3(axis);
            if n.is_finite() && n > 0.0 && (n - 1.0).abs() > AXIS_UNIT_TOL {
                axis = [axis[0] / n, axis[1] / n, axis[2] / n];
                self.warn(format!("{path}/axis"), format!("axis of norm {n} renormalized"));
            }
        }
        Ok(JointSpec {
            id,
            joint_type,
            parent,
            child,
            origin,
            axis,
            limit,
        })
    }
}

fn required_attr<'a>(node: Node<'a, '_>, key: &str, path: &str) -> Result<&'a str, UrdfError> {
    node.attribute(key)
        .ok_or_else(|| UrdfError::schema(path, format!("missing attribute {key:?}")))
}

fn parse_f64(text: &str, path: &str) -> Result<f64, UrdfError> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| UrdfError::schema(path, format!("bad number {text:?}")))
}

fn parse_triple(text: &str, path: &str) -> Result<[f64; 3], UrdfError> {
    let parts: Vec<&str> = text.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(UrdfError::schema(
            path,
            format!("expected 3 numbers, got {:?}", text),
        ));
    }
    let mut out = [0.0; 3];
    for (slot, part) in out.iter_mut().zip(parts) {
        *slot = parse_f64(part, path)?;
    }
    Ok(out)
}

fn parse_origin(node: Node, path: &str) -> Result<Pose, UrdfError> {
    let read = |key: &str| {
        node.attribute(key)
            .map(|v| parse_triple(v, &format!("{path}/@{key}")))
            .transpose()
            .map(|v| v.unwrap_or([0.0; 3]))
    };
    Ok(Pose {
        xyz: read("xyz")?,
        rpy: read("rpy")?,
    })
}

/// Canonical URDF text: all links, then all joints, in model order. Floats use
/// the shortest decimal representation that reads back to the same value.
pub fn emit_urdf(model: &UrdfModel) -> Result<String, UrdfError> {
    model
        .validate()
        .map_err(|e| UrdfError::InvariantViolation(Box::new(e)))?;
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\"?>\n");
    let _ = writeln!(out, "<robot name=\"{}\">", escape(&model.name));
    for link in &model.links {
        write_link(&mut out, link);
    }
    for joint in &model.joints {
        write_joint(&mut out, joint);
    }
    out.push_str("</robot>\n");
    Ok(out)
}

fn write_link(out: &mut String, link: &LinkSpec) {
    let _ = writeln!(out, "  <link name=\"{}\">", escape(&link.name));
    for (tag, meshes) in [("visual", &link.visuals), ("collision", &link.collisions)] {
        for mesh in meshes.iter() {
            let _ = writeln!(out, "    <{tag}>");
            let _ = writeln!(out, "      {}", origin_tag(&mesh.origin));
            out.push_str("      <geometry>\n");
            let _ = writeln!(out, "        <mesh filename=\"{}\"/>", escape(&mesh.filename));
            out.push_str("      </geometry>\n");
            let _ = writeln!(out, "    </{tag}>");
        }
    }
    let i = &link.inertial;
    out.push_str("    <inertial>\n");
    let _ = writeln!(out, "      {}", origin_tag(&i.origin));
    let _ = writeln!(out, "      <mass value=\"{}\"/>", i.mass);
    let _ = writeln!(
        out,
        "      <inertia ixx=\"{}\" ixy=\"0\" ixz=\"0\" iyy=\"{}\" iyz=\"0\" izz=\"{}\"/>",
        i.inertia_diag[0], i.inertia_diag[1], i.inertia_diag[2]
    );
    out.push_str("    </inertial>\n");
    out.push_str("  </link>\n");
}

fn write_joint(out: &mut String, joint: &JointSpec) {
    let _ = writeln!(
        out,
        "  <joint name=\"{}\" type=\"{}\">",
        escape(&joint.id),
        joint.joint_type
    );
    let _ = writeln!(out, "    {}", origin_tag(&joint.origin));
    let _ = writeln!(out, "    <parent link=\"{}\"/>", escape(&joint.parent));
    let _ = writeln!(out, "    <child link=\"{}\"/>", escape(&joint.child));
    let _ = writeln!(out, "    <axis xyz=\"{}\"/>", triple(joint.axis));
    if let Some(limit) = joint.limit {
        if joint.joint_type != JointType::Continuous {
            let _ = writeln!(
                out,
                "    <limit lower=\"{}\" upper=\"{}\"/>",
                limit.lower, limit.upper
            );
        }
    }
    out.push_str("  </joint>\n");
}

fn origin_tag(pose: &Pose) -> String {
    format!(
        "<origin xyz=\"{}\" rpy=\"{}\"/>",
        triple(pose.xyz),
        triple(pose.rpy)
    )
}

fn triple(v: [f64; 3]) -> String {
    format!("{} {} {}", v[0], v[1], v[2])
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::urdf::TreeDefect;

    const FAUCET: &str = r#"<?xml version="1.0"?>
<robot name="faucet">
  <link name="base"><visual><geometry><mesh filename="base.obj"/></geometry></visual></link>
  <link name="link_0"/>
  <link name="link_1"/>
  <link name="link_2"/>
  <link name="link_3"/>
  <joint name="joint_0" type="revolute">
    <origin xyz="-0.079 -0.48747 -0.0" rpy="1.5708 -0.0 1.5708"/>
    <parent link="base"/><child link="link_0"/>
    <axis xyz="0.0 1.0 0.0"/><limit lower="0" upper="1.57" effort="1" velocity="1"/>
  </joint>
  <joint name="joint_1" type="revolute">
    <origin xyz="-0.079 0.49568 -0.0" rpy="1.5708 -0.0 1.5708"/>
    <parent link="base"/><child link="link_1"/>
    <axis xyz="0.0 -1.0 0.0"/><limit lower="0" upper="1.57"/>
  </joint>
  <joint name="joint_2" type="continuous">
    <origin xyz="-0.079 0.00411 -0.0" rpy="1.5708 -0.0 1.5708"/>
    <parent link="base"/><child link="link_2"/>
    <axis xyz="0.0 1.0 0.0"/>
  </joint>
  <joint name="joint_3" type="fixed">
    <origin xyz="0 0 0" rpy="1.5708 0.0 1.5708"/>
    <parent link="base"/><child link="link_3"/>
    <axis xyz="1.0 0.0 0.0"/>
  </joint>
</robot>"#;

    #[test]
    fn faucet_parses_with_base_root() {
        let parsed = parse_urdf(FAUCET).unwrap();
        let m = &parsed.model;
        assert_eq!(m.links.len(), 5);
        assert_eq!(m.joints.len(), 4);
        assert_eq!(m.root(), Some("base"));
        assert_eq!(m.joints[0].limit, Some(Limit { lower: 0.0, upper: 1.57 }));
        assert_eq!(m.joints[1].axis, [0.0, -1.0, 0.0]);
        assert_eq!(m.joints[3].joint_type, JointType::Fixed);
        assert_eq!(m.link("link_0").unwrap().inertial, Inertial::default());
    }

    #[test]
    fn faucet_round_trips() {
        let m = parse_urdf(FAUCET).unwrap().model;
        let again = parse_urdf(&emit_urdf(&m).unwrap()).unwrap();
        assert_eq!(again.model, m);
        assert!(again.warnings.is_empty());
    }

    #[test]
    fn single_link_is_its_own_root() {
        let m = parse_urdf(r#"<robot name="r"><link name="only"/></robot>"#).unwrap().model;
        assert_eq!(m.root(), Some("only"));
        let xml = emit_urdf(&m).unwrap();
        assert_eq!(xml.matches("<link ").count(), 1);
        assert_eq!(xml.matches("<joint ").count(), 0);
    }

    #[test]
    fn two_cycle_is_rejected() {
        let xml = r#"<robot name="r"><link name="base"/><link name="link_0"/>
            <joint name="joint_0" type="fixed"><parent link="link_0"/><child link="base"/></joint>
            <joint name="joint_1" type="fixed"><parent link="base"/><child link="link_0"/></joint>
        </robot>"#;
        match parse_urdf(xml) {
            Err(UrdfError::TreeViolation { defect, .. }) => assert_eq!(defect, TreeDefect::Cycle),
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn malformed_xml_is_syntax_error() {
        assert!(matches!(
            parse_urdf("<robot name=\"r\"><link name=\"a\">"),
            Err(UrdfError::XmlSyntax(_))
        ));
    }

    #[test]
    fn bad_float_is_schema_violation() {
        let xml = r#"<robot name="r"><link name="a"/><link name="b"/>
            <joint name="j" type="fixed"><origin xyz="0 zero 0"/><parent link="a"/><child link="b"/></joint>
        </robot>"#;
        assert!(matches!(parse_urdf(xml), Err(UrdfError::SchemaViolation { .. })));
    }

    #[test]
    fn axis_is_renormalized_with_warning() {
        let xml = r#"<robot name="r"><link name="a"/><link name="b"/>
            <joint name="j" type="continuous"><parent link="a"/><child link="b"/>
            <axis xyz="0 0 2"/><limit lower="-1" upper="1"/></joint>
        </robot>"#;
        let parsed = parse_urdf(xml).unwrap();
        assert_eq!(parsed.model.joints[0].axis, [0.0, 0.0, 1.0]);
        assert_eq!(parsed.model.joints[0].limit, None);
        assert_eq!(parsed.warnings.len(), 2);
    }

    #[test]
    fn zero_axis_on_moving_joint_is_rejected() {
        let xml = r#"<robot name="r"><link name="a"/><link name="b"/>
            <joint name="j" type="continuous"><parent link="a"/><child link="b"/><axis xyz="0 0 0"/></joint>
        </robot>"#;
        assert!(matches!(parse_urdf(xml), Err(UrdfError::SchemaViolation { .. })));
    }

    #[test]
    fn unknown_elements_warn() {
        let xml = r#"<robot name="r"><link name="a"><sensor/></link><transmission name="t"/></robot>"#;
        let parsed = parse_urdf(xml).unwrap();
        assert_eq!(parsed.warnings.len(), 2);
    }

    #[test]
    fn emitted_axis_and_limit_are_compact() {
        let m = parse_urdf(FAUCET).unwrap().model;
        let xml = emit_urdf(&m).unwrap();
        assert!(xml.contains(r#"<axis xyz="0 1 0"/>"#));
        assert!(xml.contains(r#"<limit lower="0" upper="1.57"/>"#));
    }

    #[test]
    fn emit_rejects_invalid_model() {
        let mut m = parse_urdf(FAUCET).unwrap().model;
        m.joints[0].limit = None;
        assert!(matches!(emit_urdf(&m), Err(UrdfError::InvariantViolation(_))));
    }

    #[test]
    fn names_are_escaped() {
        let mut m = UrdfModel::new("a<b>&\"c\"");
        m.links.push(LinkSpec::with_mesh("l'1", "dir/x&y.obj"));
        let back = parse_urdf(&emit_urdf(&m).unwrap()).unwrap().model;
        assert_eq!(back, m);
    }
}
