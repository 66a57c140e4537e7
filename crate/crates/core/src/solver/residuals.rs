//! Residual terms of the box energy and their Jacobians.
//!
//! Parameters are ordered `(dv, dw, dD)`: a left se(3) perturbation of the
//! box pose followed by the three dimensions.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use crate::geometry::{
    hat, object_points, rot_y, so3_left_jacobian_inv, so3_log, wrap_to_pi, Box3D, CameraModel,
    GeometryError, KeypointSet, PoseSE3, COR_TO_OBJECT, NUM_KEYPOINTS,
};
use crate::geometry::cor_column;

use super::{EnergyWeights, Priors};

pub const NUM_PARAMS: usize = 9;
pub const NUM_ROWS: usize = 2 * NUM_KEYPOINTS;

pub type CameraResidual = SVector<f64, NUM_ROWS>;
pub type CameraJacobian = SMatrix<f64, NUM_ROWS, NUM_PARAMS>;

/// Per-keypoint weights of the reprojection term: a softmax over the nine
/// keypoint confidences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceWeight {
    pub base: [f64; NUM_KEYPOINTS],
}

impl ConfidenceWeight {
    pub fn from_confidences(conf: &[f64; NUM_KEYPOINTS]) -> Self {
        let max = conf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exp = conf.map(|c| (c - max).exp());
        let sum: f64 = exp.iter().sum();
        Self { base: exp.map(|e| e / sum) }
    }

    pub fn uniform() -> Self {
        Self { base: [1.0 / NUM_KEYPOINTS as f64; NUM_KEYPOINTS] }
    }

    /// Weight of each of the 18 residual rows (u and v share a weight).
    pub fn row_weights(&self) -> SVector<f64, NUM_ROWS> {
        SVector::from_fn(|i, _| self.base[i / 2])
    }
}

/// Box pose as a rigid transform from object to camera coordinates.
pub fn box_pose(b: &Box3D) -> PoseSE3 {
    PoseSE3::new(b.rotation(), b.t)
}

/// `observed - projected` for every keypoint; invisible keypoints give zero rows.
pub fn residual_camera_point(
    b: &Box3D,
    kps: &KeypointSet,
    cam: &CameraModel,
) -> Result<CameraResidual, GeometryError> {
    camera_residual(&box_pose(b), &b.dims, kps, cam)
}

pub(crate) fn camera_residual(
    pose: &PoseSE3,
    dims: &Vector3<f64>,
    kps: &KeypointSet,
    cam: &CameraModel,
) -> Result<CameraResidual, GeometryError> {
    let mut r = CameraResidual::zeros();
    for (j, p) in object_points(dims).iter().enumerate() {
        let uv = cam.project(&pose.transform(p))?;
        if kps.visible[j] {
            r[2 * j] = kps.pts[j].x - uv.x;
            r[2 * j + 1] = kps.pts[j].y - uv.y;
        }
    }
    Ok(r)
}

/// Derivative of [`residual_camera_point`] with respect to a left pose
/// perturbation and the dimensions, for all nine keypoints.
pub fn jacobian_camera_point(b: &Box3D, cam: &CameraModel) -> Result<CameraJacobian, GeometryError> {
    camera_jacobian(&box_pose(b), &b.dims, cam)
}

pub(crate) fn camera_jacobian(
    pose: &PoseSE3,
    dims: &Vector3<f64>,
    cam: &CameraModel,
) -> Result<CameraJacobian, GeometryError> {
    let mut jac = CameraJacobian::zeros();
    let r_obj = pose.r * COR_TO_OBJECT;
    for (j, p) in object_points(dims).iter().enumerate() {
        let q = pose.transform(p);
        let qc = cam.to_camera(&q);
        if qc.z <= crate::geometry::MIN_DEPTH {
            return Err(GeometryError::BehindCamera { depth: qc.z });
        }
        let jp = cam.projection_jacobian(&qc);
        let d_pose_v = -jp;
        let d_pose_w = jp * hat(&q);
        let d_dims = -(jp * r_obj * Matrix3::from_diagonal(&cor_column(j)));
        jac.fixed_view_mut::<2, 3>(2 * j, 0).copy_from(&d_pose_v);
        jac.fixed_view_mut::<2, 3>(2 * j, 3).copy_from(&d_pose_w);
        jac.fixed_view_mut::<2, 3>(2 * j, 6).copy_from(&d_dims);
    }
    Ok(jac)
}

pub fn residual_dimension(dims: &Vector3<f64>, dims_hat: &Vector3<f64>) -> Vector3<f64> {
    dims_hat - dims
}

/// Rotation-vector error between a yaw and its prior.
pub fn residual_rotation(yaw: f64, theta_hat: f64) -> Vector3<f64> {
    rotation_residual(&rot_y(yaw), theta_hat)
}

pub(crate) fn rotation_residual(r: &Matrix3<f64>, theta_hat: f64) -> Vector3<f64> {
    so3_log(&(r.transpose() * rot_y(theta_hat)))
}

/// Derivative of the rotation residual with respect to `dw`.
pub(crate) fn rotation_jacobian(r: &Matrix3<f64>, e_r: &Vector3<f64>) -> Matrix3<f64> {
    -(so3_left_jacobian_inv(e_r) * r.transpose())
}

/// Value of each energy term.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub camera_point: f64,
    pub dimension: f64,
    pub rotation: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.camera_point + self.dimension + self.rotation
    }
}

/// Weighted reprojection error plus the prior terms. Missing priors add 0.
pub fn total_energy(
    b: &Box3D,
    kps: &KeypointSet,
    cam: &CameraModel,
    priors: &Priors,
    weights: &EnergyWeights,
    confw: &ConfidenceWeight,
) -> Result<EnergyBreakdown, GeometryError> {
    energy(&box_pose(b), &b.dims, kps, cam, priors, weights, confw)
}

pub(crate) fn energy(
    pose: &PoseSE3,
    dims: &Vector3<f64>,
    kps: &KeypointSet,
    cam: &CameraModel,
    priors: &Priors,
    weights: &EnergyWeights,
    confw: &ConfidenceWeight,
) -> Result<EnergyBreakdown, GeometryError> {
    let r = camera_residual(pose, dims, kps, cam)?;
    let camera_point = r.component_mul(&r).dot(&confw.row_weights());
    let dimension = priors
        .dims
        .map_or(0.0, |d| weights.w_d * residual_dimension(dims, &d).norm_squared());
    let rotation = priors
        .yaw
        .map_or(0.0, |y| weights.w_r * rotation_residual(&pose.r, y).norm_squared());
    Ok(EnergyBreakdown { camera_point, dimension, rotation })
}

/// Yaw of a general rotation and the remaining roll/pitch rotation vector.
pub fn split_yaw(r: &Matrix3<f64>) -> (f64, Vector3<f64>) {
    let yaw = wrap_to_pi(r[(0, 2)].atan2(r[(2, 2)]));
    let tilt = so3_log(&(rot_y(yaw).transpose() * r));
    (yaw, tilt)
}
