use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::GeometryError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CloudFormat {
    /// Six whitespace-separated floats per line: x y z r g b.
    XyzrgbText,
    /// ASCII PLY with a `vertex` element carrying x y z and optional colors.
    PlyAscii,
}

impl CloudFormat {
    pub fn from_path(path: &Path) -> CloudFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("ply") => CloudFormat::PlyAscii,
            _ => CloudFormat::XyzrgbText,
        }
    }
}

/// N×6 XYZRGB cloud. Coordinates in meters, colors in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
    pub colors: Vec<[f64; 3]>,
}

impl PointCloud {
    /// Builds a cloud, clamping colors into `[0, 1]`.
    pub fn new(points: Vec<[f64; 3]>, colors: Vec<[f64; 3]>) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::EmptyCloud);
        }
        if points.len() != colors.len() {
            return Err(GeometryError::parse(
                0,
                format!("{} points but {} colors", points.len(), colors.len()),
            ));
        }
        if let Some(i) = points.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(GeometryError::parse(i + 1, "non-finite coordinate"));
        }
        let colors = colors
            .into_iter()
            .map(|c| c.map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }))
            .collect();
        Ok(PointCloud { points, colors })
    }

    pub fn from_points(points: Vec<[f64; 3]>) -> Result<Self, GeometryError> {
        let colors = vec![[0.5; 3]; points.len()];
        PointCloud::new(points, colors)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_xyzrgb_text(&self) -> String {
        let mut out = String::with_capacity(self.len() * 64);
        for (p, c) in self.points.iter().zip(&self.colors) {
            let _ = writeln!(out, "{} {} {} {} {} {}", p[0], p[1], p[2], c[0], c[1], c[2]);
        }
        out
    }
}

pub fn load_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud, GeometryError> {
    let text = fs::read_to_string(path).map_err(|e| GeometryError::io(path, e))?;
    parse_cloud(&text, format)
}

pub fn parse_cloud(text: &str, format: CloudFormat) -> Result<PointCloud, GeometryError> {
    match format {
        CloudFormat::XyzrgbText => parse_xyzrgb(text),
        CloudFormat::PlyAscii => parse_ply(text),
    }
}

/// Writes xyzrgb text; values use shortest round-trip formatting.
pub fn save_cloud(cloud: &PointCloud, path: &Path) -> Result<(), GeometryError> {
    fs::write(path, cloud.to_xyzrgb_text()).map_err(|e| GeometryError::io(path, e))
}

fn parse_floats(line: &str, lineno: usize) -> Result<Vec<f64>, GeometryError> {
    line.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| GeometryError::parse(lineno, format!("bad number {t:?}")))
        })
        .collect()
}

fn parse_xyzrgb(text: &str) -> Result<PointCloud, GeometryError> {
    let mut points = Vec::new();
    let mut colors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v = parse_floats(line, i + 1)?;
        if v.len() != 6 {
            return Err(GeometryError::parse(
                i + 1,
                format!("expected 6 values, found {}", v.len()),
            ));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(GeometryError::parse(i + 1, "non-finite value"));
        }
        points.push([v[0], v[1], v[2]]);
        colors.push([v[3], v[4], v[5]]);
    }
    PointCloud::new(points, colors)
}

struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<(String, String)>,
}

fn parse_ply(text: &str) -> Result<PointCloud, GeometryError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(GeometryError::parse(1, "missing 'ply' magic")),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut header_done = false;
    for (i, line) in lines.by_ref() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", ..] => {}
            ["format", other, ..] => {
                return Err(GeometryError::parse(i + 1, format!("unsupported PLY format {other}")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(PlyElement {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| GeometryError::parse(i + 1, "bad element count"))?,
                properties: Vec::new(),
            }),
            ["property", "list", ..] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| GeometryError::parse(i + 1, "property before element"))?;
                el.properties.push(("list".into(), toks.last().unwrap().to_string()));
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| GeometryError::parse(i + 1, "property before element"))?;
                el.properties.push((ty.to_string(), name.to_string()));
            }
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => return Err(GeometryError::parse(i + 1, format!("unexpected header line {line:?}"))),
        }
    }
    if !header_done {
        return Err(GeometryError::parse(0, "missing end_header"));
    }
    let mut points = Vec::new();
    let mut colors = Vec::new();
    for el in &elements {
        if el.name != "vertex" {
            for _ in 0..el.count {
                lines.next();
            }
            continue;
        }
        let col = |n: &str| el.properties.iter().position(|(_, p)| p == n);
        let (x, y, z) = match (col("x"), col("y"), col("z")) {
            (Some(x), Some(y), Some(z)) => (x, y, z),
            _ => return Err(GeometryError::parse(0, "vertex element lacks x/y/z")),
        };
        let rgb = [col("red"), col("green"), col("blue")];
        for _ in 0..el.count {
            let (i, line) = lines
                .next()
                .ok_or_else(|| GeometryError::parse(0, "truncated vertex data"))?;
            let v = parse_floats(line, i + 1)?;
            if v.len() < el.properties.len() {
                return Err(GeometryError::parse(i + 1, "too few vertex values"));
            }
            points.push([v[x], v[y], v[z]]);
            let mut c = [0.5; 3];
            for (k, idx) in rgb.iter().enumerate() {
                if let Some(idx) = *idx {
                    let integer = matches!(el.properties[idx].0.as_str(), "uchar" | "uint8");
                    c[k] = if integer { v[idx] / 255.0 } else { v[idx] };
                }
            }
            colors.push(c);
        }
        break;
    }
    PointCloud::new(points, colors)
}

/// Named subset of cloud point indices, sorted and unique.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartMask {
    pub part_name: String,
    pub indices: Vec<usize>,
}

impl PartMask {
    pub fn new(part_name: impl Into<String>, mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        PartMask {
            part_name: part_name.into(),
            indices,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn check_bounds(&self, n: usize) -> Result<(), GeometryError> {
        match self.indices.last() {
            Some(&max) if max >= n => Err(GeometryError::IndexOutOfRange {
                mask: self.part_name.clone(),
                index: max,
                len: n,
            }),
            _ => Ok(()),
        }
    }

    /// Dense 0/1 membership vector of length `n`.
    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        for &i in &self.indices {
            if i < n {
                v[i] = 1.0;
            }
        }
        v
    }
}

/// Mask files are JSON objects mapping part name to an index array.
pub fn parse_masks(text: &str) -> Result<Vec<PartMask>, GeometryError> {
    let map: IndexMap<String, Vec<usize>> = serde_json::from_str(text)
        .map_err(|e| GeometryError::parse(e.line(), e.to_string()))?;
    Ok(map.into_iter().map(|(k, v)| PartMask::new(k, v)).collect())
}

pub fn load_masks(path: &Path) -> Result<Vec<PartMask>, GeometryError> {
    let text = fs::read_to_string(path).map_err(|e| GeometryError::io(path, e))?;
    parse_masks(&text)
}

pub fn masks_to_json(masks: &[PartMask]) -> String {
    let map: IndexMap<&str, &[usize]> = masks
        .iter()
        .map(|m| (m.part_name.as_str(), m.indices.as_slice()))
        .collect();
    serde_json::to_string_pretty(&map).expect("serializable")
}

pub fn save_masks(masks: &[PartMask], path: &Path) -> Result<(), GeometryError> {
    fs::write(path, masks_to_json(masks)).map_err(|e| GeometryError::io(path, e))
}
