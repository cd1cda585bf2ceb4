use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Matrix4;
use rand::Rng;

use super::GeometryError;
use crate::urdf::rotation::transform_point;
use crate::util::{cross3, dot3, norm3, sub3};

/// Indexed triangle mesh. Faces reference three distinct vertices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        let mesh = TriMesh { vertices, faces };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if let Some(i) = self.vertices.iter().position(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(GeometryError::InvalidMesh(format!("vertex {i} is not finite")));
        }
        for (fi, f) in self.faces.iter().enumerate() {
            if f.iter().any(|&i| i >= self.vertices.len()) {
                return Err(GeometryError::InvalidMesh(format!(
                    "face {fi} references a vertex beyond {}",
                    self.vertices.len()
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(GeometryError::InvalidMesh(format!("face {fi} is degenerate")));
            }
        }
        Ok(())
    }

    /// Axis-aligned box with the given center and half extents (12 outward triangles).
    pub fn cuboid(center: [f64; 3], half: [f64; 3]) -> TriMesh {
        let mut vertices = Vec::with_capacity(8);
        for i in 0..8 {
            let s = |bit: usize| if i & bit != 0 { 1.0 } else { -1.0 };
            vertices.push([
                center[0] + s(1) * half[0],
                center[1] + s(2) * half[1],
                center[2] + s(4) * half[2],
            ]);
        }
        let faces = vec![
            [0, 2, 3], [0, 3, 1], // z-
            [4, 5, 7], [4, 7, 6], // z+
            [0, 1, 5], [0, 5, 4], // y-
            [2, 6, 7], [2, 7, 3], // y+
            [0, 4, 6], [0, 6, 2], // x-
            [1, 3, 7], [1, 7, 5], // x+
        ];
        TriMesh { vertices, faces }
    }

    pub fn transformed(&self, t: &Matrix4<f64>) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|&v| transform_point(t, v)).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Appends `other`, re-indexing its faces.
    pub fn append(&mut self, other: &TriMesh) {
        let offset = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.faces
            .extend(other.faces.iter().map(|f| f.map(|i| i + offset)));
    }

    pub fn aabb(&self) -> Option<([f64; 3], [f64; 3])> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (
                [lo[0].min(v[0]), lo[1].min(v[1]), lo[2].min(v[2])],
                [hi[0].max(v[0]), hi[1].max(v[1]), hi[2].max(v[2])],
            )
        }))
    }

    fn triangle(&self, f: &[usize; 3]) -> [[f64; 3]; 3] {
        [self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]]
    }

    pub fn face_area(&self, fi: usize) -> f64 {
        let [a, b, c] = self.triangle(&self.faces[fi]);
        0.5 * norm3(cross3(sub3(b, a), sub3(c, a)))
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|i| self.face_area(i)).sum()
    }

    /// Signed enclosed volume (divergence theorem); positive for outward faces.
    pub fn volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let [a, b, c] = self.triangle(f);
                dot3(a, cross3(b, c)) / 6.0
            })
            .sum()
    }

    pub fn edge_count(&self) -> usize {
        let mut edges = HashSet::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        edges.len()
    }

    /// V − E + F over the vertices referenced by faces.
    pub fn euler_characteristic(&self) -> i64 {
        let used: HashSet<usize> = self.faces.iter().flatten().copied().collect();
        used.len() as i64 - self.edge_count() as i64 + self.faces.len() as i64
    }

    /// Every undirected edge shared by exactly two faces with opposite orientation.
    pub fn is_closed_manifold(&self) -> bool {
        let mut directed = HashSet::new();
        for f in &self.faces {
            for k in 0..3 {
                if !directed.insert((f[k], f[(k + 1) % 3])) {
                    return false;
                }
            }
        }
        directed.iter().all(|&(a, b)| directed.contains(&(b, a)))
    }

    /// Uniform area-weighted surface samples.
    pub fn sample_surface<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<[f64; 3]> {
        if self.faces.is_empty() || n == 0 {
            return Vec::new();
        }
        let mut cumulative = Vec::with_capacity(self.faces.len());
        let mut total = 0.0;
        for i in 0..self.faces.len() {
            total += self.face_area(i);
            cumulative.push(total);
        }
        (0..n)
            .map(|_| {
                let target = rng.random::<f64>() * total;
                let fi = cumulative
                    .partition_point(|&c| c < target)
                    .min(self.faces.len() - 1);
                let [a, b, c] = self.triangle(&self.faces[fi]);
                let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
                if u + v > 1.0 {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                std::array::from_fn(|k| a[k] + u * (b[k] - a[k]) + v * (c[k] - a[k]))
            })
            .collect()
    }

    pub fn to_obj_string(&self) -> String {
        let mut out = String::with_capacity(self.vertices.len() * 48 + self.faces.len() * 24);
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
        }
        for f in &self.faces {
            let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
        out
    }
}

pub fn save_obj(mesh: &TriMesh, path: &Path) -> Result<(), GeometryError> {
    fs::write(path, mesh.to_obj_string()).map_err(|e| GeometryError::io(path, e))
}

pub fn load_obj(path: &Path) -> Result<TriMesh, GeometryError> {
    let text = fs::read_to_string(path).map_err(|e| GeometryError::io(path, e))?;
    parse_obj(&text)
}

/// Reads `v` and `f` records; other records are skipped. Polygons are fan
/// triangulated, `v/vt/vn` references use the vertex index, and negative
/// indices count back from the latest vertex.
pub fn parse_obj(text: &str) -> Result<TriMesh, GeometryError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let coords: Vec<f64> = toks
                    .take(3)
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| GeometryError::parse(lineno, format!("bad number {t:?}")))
                    })
                    .collect::<Result<_, _>>()?;
                if coords.len() != 3 {
                    return Err(GeometryError::parse(lineno, "vertex needs 3 coordinates"));
                }
                vertices.push([coords[0], coords[1], coords[2]]);
            }
            Some("f") => {
                let idx: Vec<usize> = toks
                    .map(|t| resolve_index(t, vertices.len(), lineno))
                    .collect::<Result<_, _>>()?;
                if idx.len() < 3 {
                    return Err(GeometryError::parse(lineno, "face needs at least 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    let f = [idx[0], idx[k], idx[k + 1]];
                    if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                        return Err(GeometryError::parse(lineno, "degenerate face"));
                    }
                    faces.push(f);
                }
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, faces)
}

fn resolve_index(token: &str, count: usize, lineno: usize) -> Result<usize, GeometryError> {
    let head = token.split('/').next().unwrap_or("");
    let raw: i64 = head
        .parse()
        .map_err(|_| GeometryError::parse(lineno, format!("bad face index {token:?}")))?;
    let idx = match raw {
        0 => return Err(GeometryError::parse(lineno, "face index 0 (indices are 1-based)")),
        r if r > 0 => (r - 1) as usize,
        r => {
            let back = (-r) as usize;
            if back > count {
                return Err(GeometryError::parse(lineno, format!("face index {r} out of range")));
            }
            count - back
        }
    };
    if idx >= count {
        return Err(GeometryError::parse(
            lineno,
            format!("face index {raw} refers to an undefined vertex"),
        ));
    }
    Ok(idx)
}
