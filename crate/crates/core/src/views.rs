//! Camera viewpoint sets on a sphere: equatorial rings and minimum
//! Coulomb-energy (Thomson) distributions.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::{dot3, norm3, sub3};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ViewError {
    #[error("invalid viewpoint count {n}: {message}")]
    InvalidCount { n: usize, message: String },
    #[error("elevation {0} leaves the ring degenerate")]
    InvalidElevation(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewpointSet {
    pub directions: Vec<[f64; 3]>,
    pub radius: f64,
    /// Σ_{i<j} 1/‖pᵢ−pⱼ‖ over the unit directions; spherical mode only.
    pub energy: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: [f64; 3],
    pub look_at: [f64; 3],
    pub up: [f64; 3],
}

impl ViewpointSet {
    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    /// Cameras at `radius · direction` looking at the origin, up = +z
    /// except near the poles where +x is used.
    pub fn camera_poses(&self) -> Vec<CameraPose> {
        self.directions
            .iter()
            .map(|d| CameraPose {
                position: d.map(|x| x * self.radius),
                look_at: [0.0; 3],
                up: if d[2].abs() > 1.0 - 1e-9 {
                    [1.0, 0.0, 0.0]
                } else {
                    [0.0, 0.0, 1.0]
                },
            })
            .collect()
    }
}

/// `n` directions at azimuths 2πk/n and a fixed elevation.
pub fn sample_equatorial(n: usize, elevation: f64) -> Result<ViewpointSet, ViewError> {
    if n == 0 {
        return Err(ViewError::InvalidCount {
            n,
            message: "need at least one viewpoint".into(),
        });
    }
    if !elevation.is_finite() || (n > 1 && elevation.abs() >= std::f64::consts::FRAC_PI_2) {
        return Err(ViewError::InvalidElevation(elevation));
    }
    let (sin_e, cos_e) = elevation.sin_cos();
    let directions = (0..n)
        .map(|k| {
            let (s, c) = (std::f64::consts::TAU * k as f64 / n as f64).sin_cos();
            [cos_e * c, cos_e * s, sin_e]
        })
        .collect();
    Ok(ViewpointSet {
        directions,
        radius: 1.0,
        energy: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinEnergyOptions {
    pub max_iters: usize,
    /// Stop once no point moves farther than this in one accepted step.
    pub tol: f64,
    pub restarts: usize,
}

impl Default for MinEnergyOptions {
    fn default() -> Self {
        MinEnergyOptions {
            max_iters: 10_000,
            tol: 1e-10,
            restarts: 10,
        }
    }
}

pub fn coulomb_energy(points: &[[f64; 3]]) -> f64 {
    let mut e = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            e += 1.0 / norm3(sub3(points[i], points[j]));
        }
    }
    e
}

fn normalize(p: [f64; 3]) -> [f64; 3] {
    let n = norm3(p);
    p.map(|x| x / n)
}

fn random_sphere<R: Rng>(n: usize, rng: &mut R) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| loop {
            let p: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
            if norm3(p) > 1e-12 {
                break normalize(p);
            }
        })
        .collect()
}

/// Projected gradient descent from `points`. Steps that raise the energy
/// are rejected and the step halved; accepted steps grow it by 10%.
/// Returns the final points and the energy after every accepted step.
pub fn descend(mut points: Vec<[f64; 3]>, opts: &MinEnergyOptions) -> (Vec<[f64; 3]>, Vec<f64>) {
    let n = points.len();
    let mut energy = coulomb_energy(&points);
    let mut trace = vec![energy];
    let mut step = 0.1 / n as f64;
    let mut grad = vec![[0.0; 3]; n];
    for _ in 0..opts.max_iters {
        for g in grad.iter_mut() {
            *g = [0.0; 3];
        }
        for i in 0..n {
            for j in i + 1..n {
                let d = sub3(points[i], points[j]);
                let r = norm3(d);
                let f = d.map(|x| x / (r * r * r));
                for k in 0..3 {
                    grad[i][k] -= f[k];
                    grad[j][k] += f[k];
                }
            }
        }
        let mut moved = vec![[0.0; 3]; n];
        let mut max_disp: f64 = 0.0;
        for i in 0..n {
            let p = points[i];
            let g = grad[i];
            let radial = dot3(g, p);
            let tangent = [g[0] - radial * p[0], g[1] - radial * p[1], g[2] - radial * p[2]];
            let q = normalize([p[0] - step * tangent[0], p[1] - step * tangent[1], p[2] - step * tangent[2]]);
            max_disp = max_disp.max(norm3(sub3(q, p)));
            moved[i] = q;
        }
        let candidate = coulomb_energy(&moved);
        if candidate <= energy {
            points = moved;
            energy = candidate;
            trace.push(energy);
            step *= 1.1;
            if max_disp < opts.tol {
                break;
            }
        } else {
            step *= 0.5;
            if step < 1e-300 {
                break;
            }
        }
    }
    (points, trace)
}

/// Best of `restarts` seeded descents (restart r uses seed + r); ties keep
/// the lowest restart index.
pub fn sample_min_energy(n: usize, seed: u64, opts: &MinEnergyOptions) -> Result<ViewpointSet, ViewError> {
    if n < 2 {
        return Err(ViewError::InvalidCount {
            n,
            message: "need at least two points".into(),
        });
    }
    let runs: Vec<(Vec<[f64; 3]>, f64)> = (0..opts.restarts.max(1) as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = crate::util::rng(seed.wrapping_add(r));
            let (pts, trace) = descend(random_sphere(n, &mut rng), opts);
            (pts, *trace.last().expect("trace starts non-empty"))
        })
        .collect();
    let (directions, energy) = runs
        .into_iter()
        .reduce(|best, cur| if cur.1 < best.1 { cur } else { best })
        .expect("at least one restart");
    Ok(ViewpointSet {
        directions,
        radius: 1.0,
        energy: Some(energy),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn equatorial_examples() {
        let four = sample_equatorial(4, 0.0).unwrap();
        let expect = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]];
        for (d, e) in four.directions.iter().zip(expect) {
            assert!(norm3(sub3(*d, e)) < 1e-15);
        }
        let one = sample_equatorial(1, 0.3).unwrap();
        assert!(norm3(sub3(one.directions[0], [0.3f64.cos(), 0.0, 0.3f64.sin()])) < 1e-15);
        let ring = sample_equatorial(8, PI / 6.0).unwrap();
        assert!(ring.directions.iter().all(|d| (d[2] - 0.5).abs() < 1e-15));
        assert!(ring.energy.is_none());
        assert!(sample_equatorial(0, 0.0).is_err());
        assert!(sample_equatorial(3, PI / 2.0).is_err());
    }

    #[test]
    fn small_optima() {
        let opts = MinEnergyOptions::default();
        let cases = [(2, 0.5), (3, 3f64.sqrt()), (4, 6.0 / (8.0f64 / 3.0).sqrt()), (6, 12.0 / 2f64.sqrt() + 1.5)];
        for (n, e) in cases {
            let v = sample_min_energy(n, 7, &opts).unwrap();
            assert!((v.energy.unwrap() - e).abs() < 1e-6, "n={n}: {} vs {e}", v.energy.unwrap());
            assert!(v.directions.iter().all(|d| (norm3(*d) - 1.0).abs() < 1e-9));
        }
    }

    #[test]
    fn descent_is_monotone() {
        let mut rng = crate::util::rng(5);
        let (_, trace) = descend(random_sphere(9, &mut rng), &MinEnergyOptions::default());
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn energy_is_rotation_invariant() {
        let v = sample_min_energy(7, 3, &MinEnergyOptions::default()).unwrap();
        let r = crate::urdf::rotation::axis_angle([0.3, -0.5, 0.8], 1.234);
        let rotated: Vec<[f64; 3]> = v
            .directions
            .iter()
            .map(|d| {
                let p = r * nalgebra::Vector3::from(*d);
                [p.x, p.y, p.z]
            })
            .collect();
        assert!((coulomb_energy(&rotated) - v.energy.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn poles_use_x_up() {
        let v = ViewpointSet {
            directions: vec![[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]],
            radius: 2.0,
            energy: None,
        };
        let poses = v.camera_poses();
        assert_eq!(poses[0].up, [1.0, 0.0, 0.0]);
        assert_eq!(poses[1].up, [0.0, 0.0, 1.0]);
        assert_eq!(poses[1].position, [2.0, 0.0, 0.0]);
    }

    #[test]
    fn invalid_count() {
        assert!(sample_min_energy(1, 0, &MinEnergyOptions::default()).is_err());
    }
}
