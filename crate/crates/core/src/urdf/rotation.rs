//! Roll-pitch-yaw conversions in the URDF fixed-axis convention,
//! `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.

use nalgebra::{Matrix3, Matrix4, Unit, Vector3};

/// Below this `cos(pitch)` the decomposition is treated as gimbal-locked.
const GIMBAL_EPS: f64 = 1e-9;

pub fn rpy_to_matrix(rpy: [f64; 3]) -> Matrix3<f64> {
    let (sr, cr) = rpy[0].sin_cos();
    let (sp, cp) = rpy[1].sin_cos();
    let (sy, cy) = rpy[2].sin_cos();
    Matrix3::new(
        cy * cp,
        cy * sp * sr - sy * cr,
        cy * sp * cr + sy * sr,
        sy * cp,
        sy * sp * sr + cy * cr,
        sy * sp * cr - cy * sr,
        -sp,
        cp * sr,
        cp * cr,
    )
}

/// Inverse of [`rpy_to_matrix`]. At the gimbal singularity roll is pinned to
/// zero and the residual rotation is folded into yaw.
pub fn matrix_to_rpy(m: &Matrix3<f64>) -> [f64; 3] {
    let cp = m[(0, 0)].hypot(m[(1, 0)]);
    let pitch = (-m[(2, 0)]).atan2(cp);
    if cp > GIMBAL_EPS {
        let roll = m[(2, 1)].atan2(m[(2, 2)]);
        let yaw = m[(1, 0)].atan2(m[(0, 0)]);
        [roll, pitch, yaw]
    } else {
        let yaw = (-m[(0, 1)]).atan2(m[(1, 1)]);
        [0.0, pitch, yaw]
    }
}

/// Largest entry of `|RᵀR − I|`.
pub fn orthonormality_error(m: &Matrix3<f64>) -> f64 {
    (m.transpose() * m - Matrix3::identity()).abs().max()
}

/// True when `m` is a proper rotation within `tol` (orthonormal, det ≈ +1).
pub fn is_rotation(m: &Matrix3<f64>, tol: f64) -> bool {
    m.iter().all(|x| x.is_finite())
        && orthonormality_error(m) < tol
        && (m.determinant() - 1.0).abs() < tol
}

pub fn axis_angle(axis: [f64; 3], angle: f64) -> Matrix3<f64> {
    let axis = Unit::new_normalize(Vector3::from(axis));
    *nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix()
}

pub fn homogeneous(rotation: &Matrix3<f64>, translation: [f64; 3]) -> Matrix4<f64> {
    let mut t = Matrix4::identity();
    t.fixed_view_mut::<3, 3>(0, 0).copy_from(rotation);
    t[(0, 3)] = translation[0];
    t[(1, 3)] = translation[1];
    t[(2, 3)] = translation[2];
    t
}

pub fn rotation_part(t: &Matrix4<f64>) -> Matrix3<f64> {
    t.fixed_view::<3, 3>(0, 0).into_owned()
}

pub fn translation_part(t: &Matrix4<f64>) -> [f64; 3] {
    [t[(0, 3)], t[(1, 3)], t[(2, 3)]]
}

/// Inverse of a rigid transform.
pub fn rigid_inverse(t: &Matrix4<f64>) -> Matrix4<f64> {
    let rt = rotation_part(t).transpose();
    let p = Vector3::from(translation_part(t));
    let q = -(rt * p);
    homogeneous(&rt, [q.x, q.y, q.z])
}

pub fn transform_point(t: &Matrix4<f64>, p: [f64; 3]) -> [f64; 3] {
    let v = t * nalgebra::Vector4::new(p[0], p[1], p[2], 1.0);
    [v.x, v.y, v.z]
}

pub fn transform_vector(t: &Matrix4<f64>, v: [f64; 3]) -> [f64; 3] {
    let r = rotation_part(t) * Vector3::from(v);
    [r.x, r.y, r.z]
}
