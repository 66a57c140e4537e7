use nalgebra::{Matrix2x3, Vector2, Vector3};

use super::GeometryError;

/// Points closer than this to the image plane cannot be projected.
pub const MIN_DEPTH: f64 = 1e-6;

/// Pinhole camera. `t_cam` is the projection-matrix translation column
/// expressed as a camera-frame offset, added after the object pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub t_cam: Vector3<f64>,
}

impl CameraModel {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        Self { fx, fy, cx, cy, t_cam: Vector3::zeros() }
    }

    pub fn with_offset(mut self, t_cam: Vector3<f64>) -> Self {
        self.t_cam = t_cam;
        self
    }

    /// The left color camera of the KITTI object benchmark (P2 of a typical
    /// calibration file).
    pub fn kitti_p2() -> Self {
        let (fx, cx, cy) = (721.5377, 609.5593, 172.854);
        let tz = 2.745884e-3;
        Self::new(fx, fx, cx, cy).with_offset(Vector3::new(
            (44.85728 - cx * tz) / fx,
            (0.2163791 - cy * tz) / fx,
            tz,
        ))
    }

    pub fn is_valid(&self) -> bool {
        self.fx > 0.0
            && self.fy > 0.0
            && [self.cx, self.cy].iter().chain(self.t_cam.iter()).all(|v| v.is_finite())
    }

    /// Camera-frame point after applying `t_cam`.
    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        p + self.t_cam
    }

    pub fn project(&self, p: &Vector3<f64>) -> Result<Vector2<f64>, GeometryError> {
        let q = self.to_camera(p);
        if q.z <= MIN_DEPTH {
            return Err(GeometryError::BehindCamera { depth: q.z });
        }
        Ok(Vector2::new(self.fx * q.x / q.z + self.cx, self.fy * q.y / q.z + self.cy))
    }

    /// Derivative of the pixel coordinates with respect to the camera-frame
    /// point `q` (already offset by `t_cam`).
    pub fn projection_jacobian(&self, q: &Vector3<f64>) -> Matrix2x3<f64> {
        let iz = 1.0 / q.z;
        let iz2 = iz * iz;
        Matrix2x3::new(
            self.fx * iz,
            0.0,
            -self.fx * q.x * iz2,
            0.0,
            self.fy * iz,
            -self.fy * q.y * iz2,
        )
    }

    /// Inverse of [`project`](Self::project) at a given depth. `depth` is the
    /// z coordinate before the `t_cam` offset.
    pub fn back_project(&self, px: &Vector2<f64>, depth: f64) -> Vector3<f64> {
        let z = depth + self.t_cam.z;
        let q = Vector3::new((px.x - self.cx) / self.fx * z, (px.y - self.cy) / self.fy * z, z);
        q - self.t_cam
    }
}
