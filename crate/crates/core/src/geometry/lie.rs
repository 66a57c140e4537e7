//! SO(3)/SE(3) exponential and logarithm maps.
//!
//! Twists are ordered `(v, w)`: translational part first, rotational part
//! second. Perturbations are applied on the left, `T <- exp(dxi) * T`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3, Vector6};

use super::GeometryError;

/// Below this rotation angle the closed forms switch to Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-8;

/// Rotation angles closer than this to pi make the SE(3) logarithm ambiguous.
pub const NEAR_PI: f64 = 1e-6;

/// Element of se(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist {
    /// Translational part (m).
    pub v: Vector3<f64>,
    /// Rotational part, axis times angle (rad).
    pub w: Vector3<f64>,
}

impl Twist {
    pub fn new(v: Vector3<f64>, w: Vector3<f64>) -> Self {
        Self { v, w }
    }

    pub fn zero() -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros())
    }

    pub fn from_vector(x: &Vector6<f64>) -> Self {
        Self::new(x.fixed_rows::<3>(0).into(), x.fixed_rows::<3>(3).into())
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.v.x, self.v.y, self.v.z, self.w.x, self.w.y, self.w.z)
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().chain(self.w.iter()).all(|c| c.is_finite())
    }
}

/// Rigid transform `p -> r * p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSE3 {
    pub r: Matrix3<f64>,
    pub t: Vector3<f64>,
}

impl PoseSE3 {
    pub fn new(r: Matrix3<f64>, t: Vector3<f64>) -> Self {
        Self { r, t }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn transform(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.r * p + self.t
    }

    /// `self * other`: apply `other` first.
    pub fn compose(&self, other: &PoseSE3) -> PoseSE3 {
        PoseSE3::new(self.r * other.r, self.r * other.t + self.t)
    }

    pub fn inverse(&self) -> PoseSE3 {
        let rt = self.r.transpose();
        PoseSE3::new(rt, -(rt * self.t))
    }

    /// Max deviation of `RᵀR` from identity and of `det R` from one.
    pub fn orthonormality_error(&self) -> f64 {
        let e = (self.r.transpose() * self.r - Matrix3::identity()).abs().max();
        e.max((self.r.determinant() - 1.0).abs())
    }
}

pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// `sin(t)/t`, `(1-cos t)/t²`, `(t-sin t)/t³`.
fn rodrigues_coeffs(theta: f64) -> (f64, f64, f64) {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
    } else {
        let s = theta.sin();
        let half = (0.5 * theta).sin();
        (
            s / theta,
            2.0 * half * half / (theta * theta),
            (theta - s) / (theta * theta * theta),
        )
    }
}

pub fn so3_exp(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let (a, b, _) = rodrigues_coeffs(theta);
    let k = hat(w);
    Matrix3::identity() + k * a + k * k * b
}

/// Rotation vector of `r`, valid over the whole angle range `[0, pi]`.
pub fn so3_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let a = 0.5 * vee(&(r - r.transpose()));
    let sin_t = a.norm();
    let cos_t = 0.5 * (r.trace() - 1.0);
    let theta = sin_t.atan2(cos_t);
    if theta < SMALL_ANGLE {
        return a * (1.0 + theta * theta / 6.0);
    }
    if theta < PI - 1e-3 {
        return a * (theta / sin_t);
    }
    // Close to pi the antisymmetric part vanishes; recover the axis from the
    // symmetric part (1 - cos t) n nᵀ instead.
    let s = 0.5 * (r + r.transpose()) - Matrix3::identity() * cos_t;
    let (mut best, mut col) = (s[(0, 0)], 0);
    for i in 1..3 {
        if s[(i, i)] > best {
            best = s[(i, i)];
            col = i;
        }
    }
    let mut axis: Vector3<f64> = s.column(col).into();
    axis /= axis.norm();
    if axis.dot(&a) < 0.0 {
        axis = -axis;
    }
    axis * theta
}

/// Inverse of the SO(3) left Jacobian.
pub fn so3_left_jacobian_inv(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = hat(phi);
    Matrix3::identity() - 0.5 * k + k * k * v_inv_coeff(theta)
}

/// `(1 - (t/2) cot(t/2)) / t²`.
fn v_inv_coeff(theta: f64) -> f64 {
    if theta < SMALL_ANGLE {
        1.0 / 12.0 + theta * theta / 720.0
    } else {
        let half = 0.5 * theta;
        (1.0 - half * half.cos() / half.sin()) / (theta * theta)
    }
}

pub fn exp_se3(xi: &Twist) -> PoseSE3 {
    let theta = xi.w.norm();
    let (a, b, c) = rodrigues_coeffs(theta);
    let k = hat(&xi.w);
    let k2 = k * k;
    let r = Matrix3::identity() + k * a + k2 * b;
    let v = Matrix3::identity() + k * b + k2 * c;
    PoseSE3::new(r, v * xi.v)
}

/// Twist whose exponential has rotation vector `w` and translation `t`.
/// Unlike [`log_se3`] this is defined for any rotation angle.
pub fn twist_from_parts(w: &Vector3<f64>, t: &Vector3<f64>) -> Twist {
    let k = hat(w);
    let v_inv = Matrix3::identity() - 0.5 * k + k * k * v_inv_coeff(w.norm());
    Twist::new(v_inv * t, *w)
}

pub fn log_se3(pose: &PoseSE3) -> Result<Twist, GeometryError> {
    let w = so3_log(&pose.r);
    let theta = w.norm();
    if PI - theta < NEAR_PI {
        return Err(GeometryError::AngleNearPi { angle: theta });
    }
    let k = hat(&w);
    let v_inv = Matrix3::identity() - 0.5 * k + k * k * v_inv_coeff(theta);
    Ok(Twist::new(v_inv * pose.t, w))
}

/// Canonical angle wrap into `(-pi, pi]`.
pub fn wrap_to_pi(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a - 2.0 * PI
    } else {
        a
    }
}

/// Rotation about the camera y axis (KITTI `rotation_y` convention).
pub fn rot_y(yaw: f64) -> Matrix3<f64> {
    let (s, c) = yaw.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}
