//! Incremental 3-d convex hull.

use std::collections::HashMap;

use super::{GeometryError, TriMesh};
use crate::util::{cross3, dot3, norm3, sub3};

struct Face {
    v: [usize; 3],
    normal: [f64; 3],
    offset: f64,
    alive: bool,
}

impl Face {
    fn new(v: [usize; 3], pts: &[[f64; 3]]) -> Face {
        let n = cross3(sub3(pts[v[1]], pts[v[0]]), sub3(pts[v[2]], pts[v[0]]));
        let len = norm3(n);
        let normal = if len > 0.0 {
            [n[0] / len, n[1] / len, n[2] / len]
        } else {
            [0.0; 3]
        };
        Face {
            v,
            normal,
            offset: dot3(normal, pts[v[0]]),
            alive: true,
        }
    }

    fn distance(&self, p: [f64; 3]) -> f64 {
        dot3(self.normal, p) - self.offset
    }
}

/// Convex hull as an outward-oriented closed triangle mesh. Points within a
/// small relative tolerance of an existing face are treated as inside, so
/// coplanar input points do not become hull vertices.
pub fn convex_hull(points: &[[f64; 3]]) -> Result<TriMesh, GeometryError> {
    if points.len() < 4 {
        return Err(GeometryError::DegenerateGeometry(format!(
            "{} points cannot span a volume",
            points.len()
        )));
    }
    let scale = extent(points);
    if !(scale.is_finite() && scale > 0.0) {
        return Err(GeometryError::DegenerateGeometry("points coincide".into()));
    }
    let eps = 1e-10 * scale;
    let simplex = initial_simplex(points, 1e-9 * scale)?;

    let mut faces: Vec<Face> = Vec::new();
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    for skip in 0..4 {
        let mut v = [0usize; 3];
        let mut k = 0;
        for (i, &s) in simplex.iter().enumerate() {
            if i != skip {
                v[k] = s;
                k += 1;
            }
        }
        let mut face = Face::new(v, points);
        if face.distance(points[simplex[skip]]) > 0.0 {
            v.swap(1, 2);
            face = Face::new(v, points);
        }
        add_face(&mut faces, &mut edges, face);
    }

    let mut visible = Vec::new();
    let mut horizon = Vec::new();
    for (pi, &p) in points.iter().enumerate() {
        if simplex.contains(&pi) {
            continue;
        }
        visible.clear();
        visible.extend(
            faces
                .iter()
                .enumerate()
                .filter(|(_, f)| f.alive && f.distance(p) > eps)
                .map(|(i, _)| i),
        );
        if visible.is_empty() {
            continue;
        }
        horizon.clear();
        for &fi in &visible {
            let v = faces[fi].v;
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                let twin = edges[&(b, a)];
                if !visible.contains(&twin) {
                    horizon.push((a, b));
                }
            }
        }
        for &fi in &visible {
            faces[fi].alive = false;
            let v = faces[fi].v;
            for k in 0..3 {
                edges.remove(&(v[k], v[(k + 1) % 3]));
            }
        }
        for &(a, b) in &horizon {
            let face = Face::new([a, b, pi], points);
            if !add_face(&mut faces, &mut edges, face) {
                return Err(GeometryError::DegenerateGeometry(
                    "hull construction lost manifoldness (near-degenerate input)".into(),
                ));
            }
        }
    }

    let live: Vec<[usize; 3]> = faces.iter().filter(|f| f.alive).map(|f| f.v).collect();
    let mut used: Vec<usize> = live.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let remap: HashMap<usize, usize> = used.iter().enumerate().map(|(n, &o)| (o, n)).collect();
    TriMesh::new(
        used.iter().map(|&i| points[i]).collect(),
        live.iter().map(|f| f.map(|i| remap[&i])).collect(),
    )
}

fn add_face(
    faces: &mut Vec<Face>,
    edges: &mut HashMap<(usize, usize), usize>,
    face: Face,
) -> bool {
    let id = faces.len();
    let v = face.v;
    faces.push(face);
    let mut ok = true;
    for k in 0..3 {
        ok &= edges.insert((v[k], v[(k + 1) % 3]), id).is_none();
    }
    ok
}

pub(super) fn extent(points: &[[f64; 3]]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max)
}

pub(super) fn initial_simplex(points: &[[f64; 3]], tol: f64) -> Result<[usize; 4], GeometryError> {
    let mut extremes = Vec::with_capacity(6);
    for k in 0..3 {
        let by = |a: &&[f64; 3], b: &&[f64; 3]| a[k].total_cmp(&b[k]);
        let lo = points.iter().enumerate().min_by(|a, b| by(&a.1, &b.1)).unwrap().0;
        let hi = points.iter().enumerate().max_by(|a, b| by(&a.1, &b.1)).unwrap().0;
        extremes.push(lo);
        extremes.push(hi);
    }
    let mut best = (0.0, extremes[0], extremes[1]);
    for (x, &i) in extremes.iter().enumerate() {
        for &j in &extremes[x + 1..] {
            let d = norm3(sub3(points[i], points[j]));
            if d > best.0 {
                best = (d, i, j);
            }
        }
    }
    let (_, i0, i1) = best;
    let dir = sub3(points[i1], points[i0]);
    let dir_len = norm3(dir);
    let (i2, line_dist) = argmax(points, |p| norm3(cross3(dir, sub3(p, points[i0]))) / dir_len);
    if line_dist <= tol {
        return Err(GeometryError::DegenerateGeometry("points are collinear".into()));
    }
    let n = cross3(dir, sub3(points[i2], points[i0]));
    let n_len = norm3(n);
    let (i3, plane_dist) = argmax(points, |p| (dot3(n, sub3(p, points[i0])) / n_len).abs());
    if plane_dist <= tol {
        return Err(GeometryError::DegenerateGeometry("points are coplanar".into()));
    }
    Ok([i0, i1, i2, i3])
}

fn argmax(points: &[[f64; 3]], f: impl Fn([f64; 3]) -> f64) -> (usize, f64) {
    points
        .iter()
        .enumerate()
        .map(|(i, &p)| (i, f(p)))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}
