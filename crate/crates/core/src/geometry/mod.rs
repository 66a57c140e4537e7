//! Lie-group math, the nine-point box model and pinhole projection.

mod boxes;
mod camera;
mod lie;

use thiserror::Error;

pub use boxes::{
    alpha_to_yaw, box_local_points, box_points_3d, cor_column, cor_matrix, object_points,
    yaw_to_alpha, Box3D, CorMatrix, KeypointSet, CENTER, COR_TO_OBJECT, NUM_KEYPOINTS,
};
pub use camera::{CameraModel, MIN_DEPTH};
pub use lie::{
    exp_se3, hat, log_se3, rot_y, so3_exp, so3_left_jacobian_inv, so3_log, twist_from_parts, vee,
    wrap_to_pi,
    PoseSE3, Twist, NEAR_PI, SMALL_ANGLE,
};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("point at depth {depth} is behind the camera")]
    BehindCamera { depth: f64 },
    #[error("rotation angle {angle} is too close to pi for a unique logarithm")]
    AngleNearPi { angle: f64 },
}
