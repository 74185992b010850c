//! Rotation algebra shared by the simulator, the observation builder and the
//! metrics.
//!
//! Conventions: Hamilton product, scalar-first quaternions, and `q` maps body
//! vectors into the world frame (`v_world = R(q) * v_body`).

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::MathError;

pub type Vec3 = Vector3<f64>;
pub type RotMat = Matrix3<f64>;

/// Minimum angle between the two columns of a 6D rotation before it is
/// rejected as degenerate.
pub const SIXD_DEGENERATE_ANGLE: f64 = 1e-6;

/// Unit quaternion, scalar first, always stored with `w >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQuat")]
pub struct UnitQuat {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuat {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl TryFrom<RawQuat> for UnitQuat {
    type Error = MathError;

    /// Already-canonical unit input is kept bit-for-bit so configs round-trip.
    fn try_from(q: RawQuat) -> Result<Self, MathError> {
        let n2 = q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z;
        if (n2 - 1.0).abs() < 1e-12 && q.w >= 0.0 {
            Ok(Self {
                w: q.w,
                x: q.x,
                y: q.y,
                z: q.z,
            })
        } else {
            Self::from_wxyz(q.w, q.x, q.y, q.z)
        }
    }
}

impl Default for UnitQuat {
    fn default() -> Self {
        Self::identity()
    }
}

impl UnitQuat {
    pub const fn identity() -> Self {
        Self {
            w: 1.0,
            x: 0.0,
            y: 0.0,
            z: 0.0,
        }
    }

    /// Normalizes and canonicalizes an arbitrary non-zero quaternion.
    pub fn from_wxyz(w: f64, x: f64, y: f64, z: f64) -> Result<Self, MathError> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-300 {
            return Err(MathError::ZeroQuaternion);
        }
        Ok(Self::canonical(w / n, x / n, y / n, z / n))
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Result<Self, MathError> {
        let n = axis.norm();
        if !n.is_finite() || n < 1e-300 {
            return Err(MathError::ZeroQuaternion);
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let a = axis / n;
        Self::from_wxyz(c, s * a.x, s * a.y, s * a.z)
    }

    fn canonical(w: f64, x: f64, y: f64, z: f64) -> Self {
        if w < 0.0 {
            Self {
                w: -w,
                x: -x,
                y: -y,
                z: -z,
            }
        } else {
            Self { w, x, y, z }
        }
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn wxyz(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn conj(&self) -> Self {
        Self::canonical(self.w, -self.x, -self.y, -self.z)
    }

    /// Rotates a body-frame vector into the world frame.
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        quat_to_rotmat(self) * v
    }
}

fn hamilton(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    let [aw, ax, ay, az] = a;
    let [bw, bx, by, bz] = b;
    [
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ]
}

/// Hamilton product `a ⊗ b`, renormalized.
pub fn quat_mul(a: &UnitQuat, b: &UnitQuat) -> UnitQuat {
    let [w, x, y, z] = hamilton(a.wxyz(), b.wxyz());
    let n = (w * w + x * x + y * y + z * z).sqrt();
    UnitQuat::canonical(w / n, x / n, y / n, z / n)
}

pub fn quat_to_rotmat(q: &UnitQuat) -> RotMat {
    let UnitQuat { w, x, y, z } = *q;
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, xz, yz) = (x * y, x * z, y * z);
    let (wx, wy, wz) = (w * x, w * y, w * z);
    RotMat::new(
        1.0 - 2.0 * (yy + zz),
        2.0 * (xy - wz),
        2.0 * (xz + wy),
        2.0 * (xy + wz),
        1.0 - 2.0 * (xx + zz),
        2.0 * (yz - wx),
        2.0 * (xz - wy),
        2.0 * (yz + wx),
        1.0 - 2.0 * (xx + yy),
    )
}

/// First two columns of a rotation matrix, column-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rot6D(pub [f64; 6]);

impl Rot6D {
    pub const IDENTITY: Rot6D = Rot6D([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);

    pub fn col1(&self) -> Vec3 {
        Vec3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn col2(&self) -> Vec3 {
        Vec3::new(self.0[3], self.0[4], self.0[5])
    }
}

pub fn rotmat_to_6d(r: &RotMat) -> Rot6D {
    Rot6D([
        r[(0, 0)],
        r[(1, 0)],
        r[(2, 0)],
        r[(0, 1)],
        r[(1, 1)],
        r[(2, 1)],
    ])
}

/// Gram-Schmidt reconstruction of a rotation from its 6D representation.
pub fn sixd_to_rotmat(r6: &Rot6D) -> Result<RotMat, MathError> {
    let a = r6.col1();
    let b = r6.col2();
    let (na, nb) = (a.norm(), b.norm());
    if !(na.is_finite() && nb.is_finite()) || na < 1e-300 || nb < 1e-300 {
        return Err(MathError::DegenerateInput);
    }
    // atan2 stays accurate for nearly parallel columns where acos would not.
    let angle = a.cross(&b).norm().atan2(a.dot(&b));
    if angle < SIXD_DEGENERATE_ANGLE || std::f64::consts::PI - angle < SIXD_DEGENERATE_ANGLE {
        return Err(MathError::DegenerateInput);
    }
    let c1 = a / na;
    let c2 = (b - c1 * c1.dot(&b)).normalize();
    let c3 = c1.cross(&c2);
    Ok(RotMat::from_columns(&[c1, c2, c3]))
}

/// Geodesic angle of a relative rotation, in `[0, π]`.
pub fn orientation_error_angle(r_rel: &RotMat) -> f64 {
    let c = ((r_rel.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    c.acos()
}

/// One explicit step of `q̇ = ½ q ⊗ (0, ω)` followed by exact renormalization.
pub fn integrate_quaternion(q: &UnitQuat, omega_body: &Vec3, dt: f64) -> UnitQuat {
    let dq = hamilton(q.wxyz(), [0.0, omega_body.x, omega_body.y, omega_body.z]);
    let h = 0.5 * dt;
    let w = q.w + h * dq[0];
    let x = q.x + h * dq[1];
    let y = q.y + h * dq[2];
    let z = q.z + h * dq[3];
    let n = (w * w + x * x + y * y + z * z).sqrt();
    UnitQuat::canonical(w / n, x / n, y / n, z / n)
}

/// Relative orientation `q_cur⁻¹ ⊗ q_tgt` as a rotation matrix.
pub fn relative_rotation(q_cur: &UnitQuat, q_tgt: &UnitQuat) -> RotMat {
    quat_to_rotmat(&quat_mul(&q_cur.conj(), q_tgt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn rz(angle: f64) -> UnitQuat {
        UnitQuat::from_axis_angle(&Vec3::z(), angle).unwrap()
    }

    fn assert_quat_eq(a: &UnitQuat, b: &UnitQuat, tol: f64) {
        for (x, y) in a.wxyz().iter().zip(b.wxyz()) {
            assert_abs_diff_eq!(*x, y, epsilon = tol);
        }
    }

    #[test]
    fn identity_is_left_neutral() {
        let q = UnitQuat::from_wxyz(0.3, -0.2, 0.7, 0.1).unwrap();
        assert_quat_eq(&quat_mul(&UnitQuat::identity(), &q), &q, 1e-15);
    }

    #[test]
    fn product_with_inverse_is_identity() {
        let q = UnitQuat::from_wxyz(0.3, -0.2, 0.7, 0.1).unwrap();
        assert_quat_eq(&quat_mul(&q, &q.conj()), &UnitQuat::identity(), 1e-15);
    }

    #[test]
    fn two_quarter_turns_make_a_half_turn() {
        // Rz(90)·Rz(90) = diag(-1,-1,1), whose quaternion is (0,0,0,1).
        let half = quat_mul(&rz(FRAC_PI_2), &rz(FRAC_PI_2));
        assert_quat_eq(&half, &UnitQuat::from_wxyz(0.0, 0.0, 0.0, 1.0).unwrap(), 1e-15);
        let m = quat_to_rotmat(&half);
        assert_abs_diff_eq!(m, RotMat::from_diagonal(&Vec3::new(-1.0, -1.0, 1.0)), epsilon = 1e-15);
    }

    #[test]
    fn storage_is_canonical() {
        let q = UnitQuat::from_wxyz(-0.5, 0.5, 0.5, 0.5).unwrap();
        assert!(q.w() >= 0.0);
        assert_eq!(q.wxyz(), [0.5, -0.5, -0.5, -0.5]);
    }

    #[test]
    fn half_turn_about_x() {
        let m = quat_to_rotmat(&UnitQuat::from_axis_angle(&Vec3::x(), PI).unwrap());
        assert_abs_diff_eq!(m, RotMat::from_diagonal(&Vec3::new(1.0, -1.0, -1.0)), epsilon = 1e-15);
    }

    #[test]
    fn sixd_of_quarter_turn_about_z() {
        let r6 = rotmat_to_6d(&quat_to_rotmat(&rz(FRAC_PI_2)));
        let expected = [0.0, 1.0, 0.0, -1.0, 0.0, 0.0];
        for (a, b) in r6.0.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert_eq!(rotmat_to_6d(&RotMat::identity()), Rot6D::IDENTITY);
    }

    #[test]
    fn gram_schmidt_strips_scale_and_shear() {
        let r = sixd_to_rotmat(&Rot6D([2.0, 0.0, 0.0, 1.0, 1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(r, RotMat::identity(), epsilon = 1e-15);
        assert_eq!(sixd_to_rotmat(&Rot6D::IDENTITY).unwrap(), RotMat::identity());
    }

    #[test]
    fn parallel_columns_are_rejected() {
        assert_eq!(
            sixd_to_rotmat(&Rot6D([1.0, 0.0, 0.0, 1.0, 0.0, 0.0])),
            Err(MathError::DegenerateInput)
        );
        assert_eq!(
            sixd_to_rotmat(&Rot6D([1.0, 0.0, 0.0, -3.0, 1e-9, 0.0])),
            Err(MathError::DegenerateInput)
        );
        assert_eq!(
            sixd_to_rotmat(&Rot6D([0.0; 6])),
            Err(MathError::DegenerateInput)
        );
    }

    #[test]
    fn trace_angle_cases() {
        assert_eq!(orientation_error_angle(&RotMat::identity()), 0.0);
        let quarter = quat_to_rotmat(&rz(FRAC_PI_2));
        assert_abs_diff_eq!(quarter.trace(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(orientation_error_angle(&quarter), FRAC_PI_2, epsilon = 1e-12);
        let axis = Vec3::new(0.3, -1.0, 2.0);
        let half = quat_to_rotmat(&UnitQuat::from_axis_angle(&axis, PI).unwrap());
        assert_abs_diff_eq!(orientation_error_angle(&half), PI, epsilon = 1e-7);
    }

    #[test]
    fn zero_rate_leaves_attitude_alone() {
        let q = UnitQuat::from_wxyz(0.9, 0.1, -0.3, 0.2).unwrap();
        assert_eq!(integrate_quaternion(&q, &Vec3::zeros(), 0.05), q);
    }

    #[test]
    fn constant_yaw_rate_matches_closed_form() {
        let omega = Vec3::new(0.0, 0.0, PI);
        let dt = 1e-4;
        let mut q = UnitQuat::identity();
        for _ in 0..10_000 {
            q = integrate_quaternion(&q, &omega, dt);
            assert!((q.norm() - 1.0).abs() <= 1e-9);
        }
        let err = orientation_error_angle(&relative_rotation(&q, &rz(PI)));
        assert!(err < 1e-3, "error {err}");
    }

    #[test]
    fn relative_rotation_of_equal_attitudes_is_identity() {
        let q = UnitQuat::from_wxyz(0.2, 0.4, -0.1, 0.6).unwrap();
        assert_eq!(orientation_error_angle(&relative_rotation(&q, &q)), 0.0);
    }
}
