use std::collections::HashSet;
use std::f64::consts::FRAC_PI_2;

use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};

use super::json::Json;
use super::SchemaError;
use crate::urdf::{JointSpec, JointType, Limit, Pose, AXIS_UNIT_TOL};
use crate::util::norm3;
use crate::Warning;

/// Suffix that marks a link as carrying a segmentation query.
pub const SEG_MARKER: &str = "[SEG]";

/// Name of the implicit root link.
pub const BASE_LINK: &str = "base";

/// A predicted joint has exactly the shape of a URDF joint.
pub type PredictedJoint = JointSpec;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinkEntry {
    pub link_name: String,
    /// Semantic part label with any `[SEG]` suffix removed.
    pub category: String,
    pub has_seg_marker: bool,
}

impl LinkEntry {
    pub fn new(link_name: impl Into<String>, category: impl Into<String>) -> Self {
        LinkEntry {
            link_name: link_name.into(),
            category: category.into(),
            has_seg_marker: true,
        }
    }

    /// The value as it appears in the JSON `links` object.
    pub fn raw_value(&self) -> String {
        if self.has_seg_marker {
            format!("{}{SEG_MARKER}", self.category)
        } else {
            self.category.clone()
        }
    }
}

/// Structured articulation output: a joint list plus an ordered
/// link-name → category map.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ArticulationPrediction {
    pub joints: Vec<PredictedJoint>,
    pub links: Vec<LinkEntry>,
}

impl ArticulationPrediction {
    pub fn link(&self, name: &str) -> Option<&LinkEntry> {
        self.links.iter().find(|l| l.link_name == name)
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

    /// Pretty JSON with four-space indentation and keys in schema order.
    pub fn to_json(&self) -> String {
        let mut buf = Vec::new();
        let fmt = serde_json::ser::PrettyFormatter::with_indent(b"    ");
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
        self.serialize(&mut ser).expect("in-memory serialization");
        buf.push(b'\n');
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

impl Serialize for ArticulationPrediction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(2))?;
        map.serialize_entry("joints", &JointList(&self.joints))?;
        map.serialize_entry("links", &LinkMap(&self.links))?;
        map.end()
    }
}

struct JointList<'a>(&'a [JointSpec]);
struct JointOut<'a>(&'a JointSpec);
struct OriginOut<'a>(&'a Pose);
struct LimitOut(Limit);
struct LinkMap<'a>(&'a [LinkEntry]);

impl Serialize for JointList<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.len()))?;
        for j in self.0 {
            seq.serialize_element(&JointOut(j))?;
        }
        seq.end()
    }
}

impl Serialize for JointOut<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let j = self.0;
        let mut map = s.serialize_map(None)?;
        map.serialize_entry("id", &j.id)?;
        map.serialize_entry("type", j.joint_type.as_str())?;
        map.serialize_entry("parent", &j.parent)?;
        map.serialize_entry("child", &j.child)?;
        map.serialize_entry("origin", &OriginOut(&j.origin))?;
        map.serialize_entry("axis", &j.axis)?;
        if let Some(limit) = j.limit {
            map.serialize_entry("limit", &LimitOut(limit))?;
        }
        map.end()
    }
}

impl Serialize for OriginOut<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(2))?;
        map.serialize_entry("xyz", &self.0.xyz)?;
        map.serialize_entry("rpy", &self.0.rpy)?;
        map.end()
    }
}

impl Serialize for LimitOut {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(2))?;
        map.serialize_entry("lower", &self.0.lower)?;
        map.serialize_entry("upper", &self.0.upper)?;
        map.end()
    }
}

impl Serialize for LinkMap<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for l in self.0 {
            map.serialize_entry(&l.link_name, &l.raw_value())?;
        }
        map.end()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Fill a missing revolute limit with `[0, π/2]` instead of failing.
    pub repair: bool,
    /// Require `base` to be declared in `links` rather than implied.
    pub require_explicit_base: bool,
    /// Keep axis-norm and limit defects in the result so a later stage can
    /// classify them; only structural JSON problems fail the parse.
    pub defer_parameter_checks: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedPrediction {
    pub prediction: ArticulationPrediction,
    pub warnings: Vec<Warning>,
}

pub fn parse_prediction(json_text: &str) -> Result<ArticulationPrediction, SchemaError> {
    parse_prediction_with(json_text, ParseOptions::default()).map(|p| p.prediction)
}

pub fn parse_prediction_with(
    json_text: &str,
    options: ParseOptions,
) -> Result<ParsedPrediction, SchemaError> {
    let doc: Json = serde_json::from_str(json_text).map_err(|e| SchemaError::JsonSyntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut p = Parser {
        options,
        warnings: Vec::new(),
    };
    let prediction = p.document(&doc)?;
    Ok(ParsedPrediction {
        prediction,
        warnings: p.warnings,
    })
}

struct Parser {
    options: ParseOptions,
    warnings: Vec<Warning>,
}

fn violation(path: &str, message: impl Into<String>) -> SchemaError {
    SchemaError::SchemaViolation {
        path: path.to_string(),
        message: message.into(),
    }
}

fn expect_object<'a>(v: &'a Json, path: &str) -> Result<&'a [(String, Json)], SchemaError> {
    match v {
        Json::Object(entries) => Ok(entries),
        other => Err(violation(path, format!("expected object, found {}", other.kind()))),
    }
}

fn expect_str<'a>(v: &'a Json, path: &str) -> Result<&'a str, SchemaError> {
    match v {
        Json::String(s) => Ok(s),
        other => Err(violation(path, format!("expected string, found {}", other.kind()))),
    }
}

fn expect_number(v: &Json, path: &str) -> Result<f64, SchemaError> {
    match v {
        Json::Number(x) if x.is_finite() => Ok(*x),
        other => Err(violation(path, format!("expected number, found {}", other.kind()))),
    }
}

fn expect_triple(v: &Json, path: &str) -> Result<[f64; 3], SchemaError> {
    let Json::Array(items) = v else {
        return Err(violation(path, format!("expected array of 3 numbers, found {}", v.kind())));
    };
    if items.len() != 3 {
        return Err(violation(
            path,
            format!("expected 3 numbers, found {}", items.len()),
        ));
    }
    let mut out = [0.0; 3];
    for (i, item) in items.iter().enumerate() {
        out[i] = expect_number(item, &format!("{path}[{i}]"))?;
    }
    Ok(out)
}

fn required<'a>(obj: &'a Json, key: &str, path: &str) -> Result<&'a Json, SchemaError> {
    obj.get(key)
        .ok_or_else(|| violation(path, format!("missing key {key:?}")))
}

impl Parser {
    fn document(&mut self, doc: &Json) -> Result<ArticulationPrediction, SchemaError> {
        let top = expect_object(doc, "$")?;
        for (key, _) in top {
            if key != "joints" && key != "links" {
                self.warnings
                    .push(Warning::new(format!("$.{key}"), "unknown key ignored"));
            }
        }
        let joints_json = match required(doc, "joints", "$")? {
            Json::Array(items) => items,
            other => {
                return Err(violation(
                    "$.joints",
                    format!("expected array, found {}", other.kind()),
                ))
            }
        };
        let mut joints = Vec::with_capacity(joints_json.len());
        let mut ids = HashSet::new();
        for (i, j) in joints_json.iter().enumerate() {
            let joint = self.joint(j, &format!("$.joints[{i}]"))?;
            if !ids.insert(joint.id.clone()) {
                return Err(violation(
                    &format!("$.joints[{i}].id"),
                    format!("duplicate joint id {:?}", joint.id),
                ));
            }
            joints.push(joint);
        }
        let links_json = expect_object(required(doc, "links", "$")?, "$.links")?;
        let mut links = Vec::with_capacity(links_json.len());
        let mut names = HashSet::new();
        for (name, value) in links_json {
            let path = format!("$.links.{name}");
            if !names.insert(name.as_str()) {
                return Err(violation(&path, format!("link {name:?} declared more than once")));
            }
            links.push(link_entry(name, expect_str(value, &path)?, &path)?);
        }
        let base_declared = names.contains(BASE_LINK);
        if self.options.require_explicit_base && !base_declared {
            return Err(SchemaError::ConsistencyViolation {
                path: "$.links".into(),
                message: format!("link {BASE_LINK:?} must be declared"),
            });
        }
        for (i, j) in joints.iter().enumerate() {
            for (key, name) in [("parent", &j.parent), ("child", &j.child)] {
                let implicit_base = name == BASE_LINK && !self.options.require_explicit_base;
                if !names.contains(name.as_str()) && !implicit_base {
                    return Err(SchemaError::ConsistencyViolation {
                        path: format!("$.joints[{i}].{key}"),
                        message: format!("joint {:?} references undeclared link {name:?}", j.id),
                    });
                }
            }
        }
        Ok(ArticulationPrediction { joints, links })
    }

    fn joint(&mut self, j: &Json, path: &str) -> Result<JointSpec, SchemaError> {
        expect_object(j, path)?;
        let id = expect_str(required(j, "id", path)?, &format!("{path}.id"))?.to_string();
        // Errors below name the joint id so a reader can find it without counting.
        let ctx = |e: SchemaError| match e {
            SchemaError::SchemaViolation { path, message } => SchemaError::SchemaViolation {
                path,
                message: format!("joint {id:?}: {message}"),
            },
            other => other,
        };
        const KNOWN: [&str; 7] = ["id", "type", "parent", "child", "origin", "axis", "limit"];
        let type_text = expect_str(required(j, "type", path).map_err(ctx)?, &format!("{path}.type"))
            .map_err(ctx)?;
        let joint_type: JointType = type_text
            .parse()
            .map_err(|e: String| ctx(violation(&format!("{path}.type"), e)))?;
        let parent = expect_str(required(j, "parent", path).map_err(ctx)?, &format!("{path}.parent"))
            .map_err(ctx)?
            .to_string();
        let child = expect_str(required(j, "child", path).map_err(ctx)?, &format!("{path}.child"))
            .map_err(ctx)?
            .to_string();
        let origin_json = required(j, "origin", path).map_err(ctx)?;
        let opath = format!("{path}.origin");
        expect_object(origin_json, &opath).map_err(ctx)?;
        let origin = Pose {
            xyz: expect_triple(required(origin_json, "xyz", &opath).map_err(ctx)?, &format!("{opath}.xyz"))
                .map_err(ctx)?,
            rpy: expect_triple(required(origin_json, "rpy", &opath).map_err(ctx)?, &format!("{opath}.rpy"))
                .map_err(ctx)?,
        };
        let apath = format!("{path}.axis");
        let mut axis = match j.get("axis") {
            Some(a) => expect_triple(a, &apath).map_err(ctx)?,
            None if !joint_type.uses_axis() => {
                self.warnings
                    .push(Warning::new(&apath, "missing axis defaulted to [1, 0, 0]"));
                [1.0, 0.0, 0.0]
            }
            None => return Err(ctx(violation(path, "missing key \"axis\""))),
        };
        let lpath = format!("{path}.limit");
        let mut limit = match j.get("limit") {
            None | Some(Json::Null) => None,
            Some(l) => {
                expect_object(l, &lpath).map_err(ctx)?;
                Some(Limit {
                    lower: expect_number(required(l, "lower", &lpath).map_err(ctx)?, &format!("{lpath}.lower"))
                        .map_err(ctx)?,
                    upper: expect_number(required(l, "upper", &lpath).map_err(ctx)?, &format!("{lpath}.upper"))
                        .map_err(ctx)?,
                })
            }
        };
        if let Json::Object(entries) = j {
            for (key, _) in entries {
                if !KNOWN.contains(&key.as_str()) {
                    self.warnings
                        .push(Warning::new(format!("{path}.{key}"), "unknown key ignored"));
                }
            }
        }

        if joint_type == JointType::Continuous && limit.take().is_some() {
            self.warnings
                .push(Warning::new(&lpath, "limit on continuous joint ignored"));
        }
        if joint_type.uses_axis() {
            let n = norm3(axis);
            if n > 0.0 && (n - 1.0).abs() > AXIS_UNIT_TOL {
                axis = [axis[0] / n, axis[1] / n, axis[2] / n];
                self.warnings
                    .push(Warning::new(&apath, format!("axis of norm {n} renormalized")));
            } else if n == 0.0 && !self.options.defer_parameter_checks {
                return Err(ctx(violation(&apath, format!("zero axis on {joint_type} joint"))));
            }
        }
        if joint_type.requires_limit() && !self.options.defer_parameter_checks {
            match limit {
                None if self.options.repair && joint_type == JointType::Revolute => {
                    limit = Some(Limit {
                        lower: 0.0,
                        upper: FRAC_PI_2,
                    });
                    self.warnings
                        .push(Warning::new(&lpath, "repaired: missing limit set to [0, pi/2]"));
                }
                None => {
                    return Err(ctx(violation(
                        &lpath,
                        format!("{joint_type} joint requires a limit"),
                    )))
                }
                Some(l) if l.lower > l.upper => {
                    return Err(ctx(violation(
                        &lpath,
                        format!("lower {} exceeds upper {}", l.lower, l.upper),
                    )))
                }
                Some(_) => {}
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

fn link_entry(name: &str, raw: &str, path: &str) -> Result<LinkEntry, SchemaError> {
    let markers = raw.matches(SEG_MARKER).count();
    let (category, has_seg_marker) = match markers {
        0 => (raw, false),
        1 if raw.ends_with(SEG_MARKER) => (&raw[..raw.len() - SEG_MARKER.len()], true),
        _ => {
            return Err(violation(
                path,
                format!("{SEG_MARKER} must appear once, as a suffix, in {raw:?}"),
            ))
        }
    };
    if category.is_empty() {
        return Err(violation(path, "empty category"));
    }
    Ok(LinkEntry {
        link_name: name.to_string(),
        category: category.to_string(),
        has_seg_marker,
    })
}
