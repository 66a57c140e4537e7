//! The nine-point box model.
//!
//! Columns of [`cor_matrix`] scale by `diag(h, w, l)` into a frame whose axes
//! are (height, width, length). In KITTI camera coordinates those axes are
//! (y, z, x), a cyclic permutation; [`COR_TO_OBJECT`] applies it so that the
//! box pose is the KITTI pose `(rotation_y, location)`.

use nalgebra::{Matrix3, SMatrix, Vector2, Vector3};

use super::lie::{rot_y, wrap_to_pi};

pub const NUM_KEYPOINTS: usize = 9;

/// Index of the projected 3D center in a keypoint set.
pub const CENTER: usize = 8;

pub type CorMatrix = SMatrix<f64, 4, 9>;

#[rustfmt::skip]
pub fn cor_matrix() -> CorMatrix {
    CorMatrix::from_row_slice(&[
        0.0,  0.0,  0.0,  0.0, -1.0, -1.0, -1.0, -1.0, -0.5,
        0.5, -0.5, -0.5,  0.5,  0.5, -0.5, -0.5,  0.5,  0.0,
        0.5,  0.5, -0.5, -0.5,  0.5,  0.5, -0.5, -0.5,  0.0,
        1.0,  1.0,  1.0,  1.0,  1.0,  1.0,  1.0,  1.0,  1.0,
    ])
}

/// Maps (height, width, length) axes onto KITTI object axes (y, z, x).
#[rustfmt::skip]
pub const COR_TO_OBJECT: Matrix3<f64> = Matrix3::new(
    0.0, 0.0, 1.0,
    1.0, 0.0, 0.0,
    0.0, 1.0, 0.0,
);

/// Unit-box coordinates of keypoint `j` (first three rows of Cor).
pub fn cor_column(j: usize) -> Vector3<f64> {
    let c = cor_matrix();
    Vector3::new(c[(0, j)], c[(1, j)], c[(2, j)])
}

/// Oriented 3D box. `t` is the bottom-face center in camera coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3D {
    /// `[h, w, l]` in meters.
    pub dims: Vector3<f64>,
    pub t: Vector3<f64>,
    pub yaw: f64,
}

impl Box3D {
    pub fn new(dims: Vector3<f64>, t: Vector3<f64>, yaw: f64) -> Self {
        Self { dims, t, yaw: wrap_to_pi(yaw) }
    }

    pub fn h(&self) -> f64 {
        self.dims[0]
    }
    pub fn w(&self) -> f64 {
        self.dims[1]
    }
    pub fn l(&self) -> f64 {
        self.dims[2]
    }

    pub fn is_valid(&self) -> bool {
        self.dims.iter().all(|d| *d > 0.0 && d.is_finite())
            && self.t.iter().all(|c| c.is_finite())
            && self.yaw.is_finite()
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rot_y(self.yaw)
    }

    /// Geometric center of the box.
    pub fn center(&self) -> Vector3<f64> {
        self.t - Vector3::new(0.0, 0.5 * self.h(), 0.0)
    }

    pub fn volume(&self) -> f64 {
        self.dims.product()
    }

    /// Footprint corners in the x-z plane, counter-clockwise seen from above
    /// with x right and z forward.
    pub fn bev_corners(&self) -> [Vector2<f64>; 4] {
        let (s, c) = self.yaw.sin_cos();
        let (hl, hw) = (0.5 * self.l(), 0.5 * self.w());
        [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)].map(|(x, z)| {
            // rot_y applied to (x, 0, z)
            Vector2::new(c * x + s * z + self.t.x, -s * x + c * z + self.t.z)
        })
    }
}

/// `diag(D) * Cor` columns in the (height, width, length) frame.
pub fn box_local_points(dims: &Vector3<f64>) -> [Vector3<f64>; NUM_KEYPOINTS] {
    std::array::from_fn(|j| cor_column(j).component_mul(dims))
}

/// Box keypoints in the object frame (KITTI axes, before yaw and translation).
pub fn object_points(dims: &Vector3<f64>) -> [Vector3<f64>; NUM_KEYPOINTS] {
    box_local_points(dims).map(|p| COR_TO_OBJECT * p)
}

/// The eight vertexes and the 3D center in camera coordinates.
pub fn box_points_3d(b: &Box3D) -> [Vector3<f64>; NUM_KEYPOINTS] {
    let r = b.rotation();
    object_points(&b.dims).map(|p| r * p + b.t)
}

/// Global yaw from the observation angle and the object location.
pub fn alpha_to_yaw(alpha: f64, t: &Vector3<f64>) -> f64 {
    wrap_to_pi(alpha + t.x.atan2(t.z))
}

pub fn yaw_to_alpha(yaw: f64, t: &Vector3<f64>) -> f64 {
    wrap_to_pi(yaw - t.x.atan2(t.z))
}

/// Nine ordered keypoints: vertexes 1..8 then the projected 3D center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeypointSet {
    pub pts: [Vector2<f64>; NUM_KEYPOINTS],
    pub conf: [f64; NUM_KEYPOINTS],
    pub visible: [bool; NUM_KEYPOINTS],
}

impl KeypointSet {
    pub fn new(pts: [Vector2<f64>; NUM_KEYPOINTS]) -> Self {
        Self { pts, conf: [1.0; NUM_KEYPOINTS], visible: [true; NUM_KEYPOINTS] }
    }

    pub fn visible_count(&self) -> usize {
        self.visible.iter().filter(|v| **v).count()
    }

    pub fn visible_points(&self) -> impl Iterator<Item = &Vector2<f64>> {
        self.pts.iter().zip(self.visible.iter()).filter(|(_, v)| **v).map(|(p, _)| p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cor_matches_published_columns() {
        let c = cor_matrix();
        assert_eq!(c.column(8).as_slice(), &[-0.5, 0.0, 0.0, 1.0]);
        assert_eq!(c.column(0).as_slice(), &[0.0, 0.5, 0.5, 1.0]);
        assert_eq!(c.row(3).sum(), 9.0);
    }

    #[test]
    fn local_points_of_a_cube() {
        let p = box_local_points(&Vector3::new(2.0, 2.0, 2.0));
        assert_eq!(p[0], Vector3::new(0.0, 1.0, 1.0));
        assert_eq!(p[8], Vector3::new(-1.0, 0.0, 0.0));
    }

    #[test]
    fn camera_frame_matches_kitti_corner_layout() {
        // KITTI devkit: x = ±l/2, y in {0, -h}, z = ±w/2 before rotation.
        let b = Box3D::new(Vector3::new(1.5, 1.6, 3.9), Vector3::zeros(), 0.0);
        let p = box_points_3d(&b);
        assert_eq!(p[0], Vector3::new(1.95, 0.0, 0.8));
        assert_eq!(p[8], Vector3::new(0.0, -0.75, 0.0));
        assert_eq!(p[8], b.center());
    }

    #[test]
    fn permutation_is_a_rotation() {
        assert_eq!(COR_TO_OBJECT.determinant(), 1.0);
        assert_eq!(COR_TO_OBJECT.transpose() * COR_TO_OBJECT, Matrix3::identity());
    }

    #[test]
    fn alpha_on_optical_axis() {
        let t = Vector3::new(0.0, 0.0, 10.0);
        assert_eq!(alpha_to_yaw(0.0, &t), 0.0);
        assert_eq!(alpha_to_yaw(0.3, &t), 0.3);
    }

    fn box_strategy() -> impl Strategy<Value = Box3D> {
        (
            prop::array::uniform3(0.3..5.0f64),
            prop::array::uniform3(-30.0..30.0f64),
            -std::f64::consts::PI..std::f64::consts::PI,
        )
            .prop_map(|(d, t, yaw)| Box3D::new(Vector3::from(d), Vector3::from(t), yaw))
    }

    proptest! {
        #[test]
        fn center_is_vertex_centroid(b in box_strategy()) {
            let p = box_points_3d(&b);
            let c = p[..8].iter().sum::<Vector3<f64>>() / 8.0;
            prop_assert!((c - p[8]).norm() < 1e-12);
        }

        #[test]
        fn rigid_under_pose(b in box_strategy(), t in prop::array::uniform3(-30.0..30.0f64), yaw in -3.0..3.0f64) {
            let moved = Box3D::new(b.dims, Vector3::from(t), yaw);
            let (p, q) = (box_points_3d(&b), box_points_3d(&moved));
            for i in 0..8 {
                for j in 0..8 {
                    prop_assert!(((p[i] - p[j]).norm() - (q[i] - q[j]).norm()).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn alpha_yaw_roundtrip(alpha in -std::f64::consts::PI..std::f64::consts::PI, x in -30.0..30.0f64, z in 0.5..80.0f64) {
            let t = Vector3::new(x, 1.0, z);
            let back = yaw_to_alpha(alpha_to_yaw(alpha, &t), &t);
            prop_assert!(wrap_to_pi(back - alpha).abs() < 1e-12);
        }
    }
}
