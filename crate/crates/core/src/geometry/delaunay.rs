//! Bowyer-Watson Delaunay tetrahedralization and alpha shapes.

use std::collections::HashMap;

use rand::Rng;

use super::hull::{extent, initial_simplex};
use super::{GeometryError, TriMesh};
use crate::util::{cross3, dot3, sub3};

const SUPER_SCALE: f64 = 100.0;
const JITTER: f64 = 1e-10;

struct Tet {
    v: [usize; 4],
    alive: bool,
}

fn orient(a: [f64; 3], b: [f64; 3], c: [f64; 3], d: [f64; 3]) -> f64 {
    dot3(sub3(b, a), cross3(sub3(c, a), sub3(d, a)))
}

fn circumsphere(a: [f64; 3], b: [f64; 3], c: [f64; 3], d: [f64; 3]) -> ([f64; 3], f64) {
    let (u, v, w) = (sub3(b, a), sub3(c, a), sub3(d, a));
    let denom = 2.0 * dot3(u, cross3(v, w));
    let (uu, vv, ww) = (dot3(u, u), dot3(v, v), dot3(w, w));
    let vw = cross3(v, w);
    let wu = cross3(w, u);
    let uv = cross3(u, v);
    let rel = [
        (uu * vw[0] + vv * wu[0] + ww * uv[0]) / denom,
        (uu * vw[1] + vv * wu[1] + ww * uv[1]) / denom,
        (uu * vw[2] + vv * wu[2] + ww * uv[2]) / denom,
    ];
    ([a[0] + rel[0], a[1] + rel[1], a[2] + rel[2]], dot3(rel, rel))
}

fn make_tet(mut v: [usize; 4], pts: &[[f64; 3]]) -> Tet {
    if orient(pts[v[0]], pts[v[1]], pts[v[2]], pts[v[3]]) < 0.0 {
        v.swap(2, 3);
    }
    Tet { v, alive: true }
}

/// Lifted 4x4 determinant test; true when `p` is strictly inside the
/// circumsphere of the positively oriented tetrahedron `v`.
fn in_circumsphere(v: [usize; 4], pts: &[[f64; 3]], p: [f64; 3]) -> bool {
    let rows = v.map(|i| {
        let d = sub3(pts[i], p);
        [d[0], d[1], d[2], dot3(d, d)]
    });
    let m = nalgebra::Matrix4::from_fn(|r, c| rows[r][c]);
    m.determinant() < 0.0
}

/// Outward faces of a positively oriented tetrahedron.
fn tet_faces(v: [usize; 4]) -> [[usize; 3]; 4] {
    let [a, b, c, d] = v;
    [[a, c, b], [a, b, d], [a, d, c], [b, c, d]]
}

fn face_key(f: [usize; 3]) -> [usize; 3] {
    let mut k = f;
    k.sort_unstable();
    k
}

/// Delaunay tetrahedra of the point set, as positively oriented index
/// quadruples into `points`. Exact duplicate points are ignored after their
/// first occurrence.
pub fn tetrahedralize(points: &[[f64; 3]]) -> Result<Vec<[usize; 4]>, GeometryError> {
    Ok(triangulate(points)?.0)
}

fn triangulate(points: &[[f64; 3]]) -> Result<(Vec<[usize; 4]>, Vec<f64>), GeometryError> {
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
    initial_simplex(points, 1e-9 * scale)?;

    let mut seen = HashMap::new();
    let unique: Vec<usize> = (0..points.len())
        .filter(|&i| seen.insert(points[i].map(f64::to_bits), i).is_none())
        .collect();

    let half = scale / 2.0;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0, (lo[2] + hi[2]) / 2.0];
    // Tiny deterministic jitter breaks co-spherical ties (lattice input).
    let mut rng = crate::util::rng(0x5eed_de1a);
    let mut pts: Vec<[f64; 3]> = unique
        .iter()
        .map(|&i| {
            let p = points[i];
            let mut q = [0.0; 3];
            for k in 0..3 {
                q[k] = (p[k] - mid[k]) / half + JITTER * rng.random_range(-1.0..1.0);
            }
            q
        })
        .collect();
    let n = pts.len();
    let (m, far) = (SUPER_SCALE, 5.0 * SUPER_SCALE);
    pts.push([-m, -m, -m]);
    pts.push([far, -m, -m]);
    pts.push([-m, far, -m]);
    pts.push([-m, -m, far]);

    let mut tets = vec![make_tet([n, n + 1, n + 2, n + 3], &pts)];
    let mut boundary: HashMap<[usize; 3], Option<[usize; 3]>> = HashMap::new();
    for pi in 0..n {
        let p = pts[pi];
        boundary.clear();
        for t in tets.iter_mut().filter(|t| t.alive) {
            if in_circumsphere(t.v, &pts, p) {
                t.alive = false;
                for f in tet_faces(t.v) {
                    boundary
                        .entry(face_key(f))
                        .and_modify(|e| *e = None)
                        .or_insert(Some(f));
                }
            }
        }
        let mut faces: Vec<[usize; 3]> = boundary.values().flatten().copied().collect();
        faces.sort_unstable();
        for f in faces {
            tets.push(make_tet([f[0], f[1], f[2], pi], &pts));
        }
        if tets.len() > 64 && tets.iter().filter(|t| !t.alive).count() * 2 > tets.len() {
            tets.retain(|t| t.alive);
        }
    }

    let mut out = Vec::new();
    let mut radii = Vec::new();
    let min_volume = 1e-12 * scale.powi(3);
    for t in tets.iter().filter(|t| t.alive && t.v.iter().all(|&i| i < n)) {
        let orig = t.v.map(|i| unique[i]);
        // Flat slivers from jittered coplanar input carry no volume.
        if orient(points[orig[0]], points[orig[1]], points[orig[2]], points[orig[3]]) <= min_volume {
            continue;
        }
        out.push(orig);
        let r2 = circumsphere(pts[t.v[0]], pts[t.v[1]], pts[t.v[2]], pts[t.v[3]]).1;
        radii.push(r2.sqrt() * half);
    }
    if out.is_empty() {
        return Err(GeometryError::DegenerateGeometry("no tetrahedra".into()));
    }
    Ok((out, radii))
}

/// Boundary of the union of Delaunay tetrahedra whose circumradius does not
/// exceed `radius`, with outward-facing triangles.
pub fn alpha_shape(points: &[[f64; 3]], radius: f64) -> Result<TriMesh, GeometryError> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(GeometryError::DegenerateGeometry(format!(
            "alpha radius must be positive, got {radius}"
        )));
    }
    let (tets, radii) = triangulate(points)?;
    let mut count: HashMap<[usize; 3], (usize, [usize; 3])> = HashMap::new();
    let mut order = Vec::new();
    for (t, r) in tets.iter().zip(&radii) {
        if *r > radius {
            continue;
        }
        for f in tet_faces(*t) {
            let key = face_key(f);
            let e = count.entry(key).or_insert_with(|| {
                order.push(key);
                (0, f)
            });
            e.0 += 1;
        }
    }
    let faces: Vec<[usize; 3]> = order
        .iter()
        .filter_map(|k| match count[k] {
            (1, f) => Some(f),
            _ => None,
        })
        .collect();
    if faces.is_empty() {
        return Err(GeometryError::DegenerateGeometry(format!(
            "no tetrahedron has circumradius within {radius}"
        )));
    }
    let mut used: Vec<usize> = faces.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let remap: HashMap<usize, usize> = used.iter().enumerate().map(|(n, &o)| (o, n)).collect();
    TriMesh::new(
        used.iter().map(|&i| points[i]).collect(),
        faces.iter().map(|f| f.map(|i| remap[&i])).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::convex_hull;

    fn tet_volume(points: &[[f64; 3]], t: [usize; 4]) -> f64 {
        orient(points[t[0]], points[t[1]], points[t[2]], points[t[3]]) / 6.0
    }

    fn random_ball(n: usize, seed: u64) -> Vec<[f64; 3]> {
        let mut rng = crate::util::rng(seed);
        let mut out = Vec::new();
        while out.len() < n {
            let p = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            if dot3(p, p) <= 1.0 {
                out.push(p);
            }
        }
        out
    }

    #[test]
    fn insphere_sign() {
        let pts = [[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(orient(pts[0], pts[1], pts[2], pts[3]) > 0.0);
        assert!(in_circumsphere([0, 1, 2, 3], &pts, [0.1, 0.1, 0.1]));
        assert!(!in_circumsphere([0, 1, 2, 3], &pts, [2.0, 2.0, 2.0]));
    }

    #[test]
    fn lattice_cube_fills_its_volume() {
        let mut pts = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    pts.push([i as f64, j as f64, k as f64]);
                }
            }
        }
        let tets = tetrahedralize(&pts).unwrap();
        let vol: f64 = tets.iter().map(|&t| tet_volume(&pts, t)).sum();
        assert!((vol - 8.0).abs() < 1e-9, "{vol}");
        assert!(tets.iter().all(|&t| tet_volume(&pts, t) > 0.0));
    }

    #[test]
    fn empty_circumsphere_and_hull_coverage() {
        let pts = random_ball(300, 3);
        let tets = tetrahedralize(&pts).unwrap();
        for &t in &tets {
            let (c, r2) = circumsphere(pts[t[0]], pts[t[1]], pts[t[2]], pts[t[3]]);
            for (i, &p) in pts.iter().enumerate() {
                if t.contains(&i) {
                    continue;
                }
                let d = sub3(p, c);
                assert!(dot3(d, d) >= r2 * (1.0 - 1e-7));
            }
        }
        let vol: f64 = tets.iter().map(|&t| tet_volume(&pts, t)).sum();
        let hull = convex_hull(&pts).unwrap().volume();
        assert!((vol - hull).abs() < 1e-9 * hull.max(1.0), "{vol} vs {hull}");
    }

    #[test]
    fn duplicates_are_ignored() {
        let mut pts = random_ball(40, 9);
        pts.extend_from_slice(&pts.clone()[..10]);
        let tets = tetrahedralize(&pts).unwrap();
        assert!(tets.iter().flatten().all(|&i| i < 40));
    }

    #[test]
    fn alpha_shape_large_radius_is_hull() {
        let pts = random_ball(200, 5);
        let shape = alpha_shape(&pts, 1e6).unwrap();
        let hull = convex_hull(&pts).unwrap();
        assert!(shape.is_closed_manifold());
        assert!((shape.volume() - hull.volume()).abs() < 1e-9);
    }

    #[test]
    fn alpha_shape_tiny_radius_is_degenerate() {
        let pts = random_ball(50, 1);
        assert!(matches!(alpha_shape(&pts, 1e-6), Err(GeometryError::DegenerateGeometry(_))));
        assert!(alpha_shape(&pts, -1.0).is_err());
    }

    #[test]
    fn coplanar_input_is_degenerate() {
        let pts: Vec<[f64; 3]> = (0..20).map(|i| [i as f64, (i % 7) as f64, 0.0]).collect();
        assert!(matches!(tetrahedralize(&pts), Err(GeometryError::DegenerateGeometry(_))));
    }
}
