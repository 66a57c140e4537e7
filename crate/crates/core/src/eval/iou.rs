use nalgebra::Vector2;

use crate::geometry::Box3D;

/// Intersection areas below this count as touching, not overlapping.
pub const AREA_EPS: f64 = 1e-9;

pub fn polygon_area(poly: &[Vector2<f64>]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        s += a.x * b.y - a.y * b.x;
    }
    0.5 * s
}

fn cross(o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Sutherland–Hodgman clipping of `subject` by a convex counter-clockwise
/// `clip` polygon.
pub fn clip_convex(subject: &[Vector2<f64>], clip: &[Vector2<f64>]) -> Vec<Vector2<f64>> {
    let mut out = subject.to_vec();
    for i in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let (p, q) = (input[j], input[(j + 1) % input.len()]);
            let (dp, dq) = (cross(&a, &b, &p), cross(&a, &b, &q));
            if dp >= 0.0 {
                out.push(p);
            }
            if (dp >= 0.0) != (dq >= 0.0) {
                let t = dp / (dp - dq);
                out.push(p + (q - p) * t);
            }
        }
    }
    out
}

/// Footprint overlap area in the x–z plane.
pub fn bev_intersection(a: &Box3D, b: &Box3D) -> f64 {
    let area = polygon_area(&clip_convex(&a.bev_corners(), &b.bev_corners()));
    if area < AREA_EPS {
        0.0
    } else {
        area
    }
}

fn ratio(inter: f64, a: f64, b: f64) -> f64 {
    let union = a + b - inter;
    if inter <= 0.0 || union <= 0.0 {
        0.0
    } else {
        (inter / union).min(1.0)
    }
}

pub fn bev_iou(a: &Box3D, b: &Box3D) -> f64 {
    ratio(bev_intersection(a, b), a.l() * a.w(), b.l() * b.w())
}

/// Overlap of the vertical extents; boxes span `[y - h, y]` with y pointing
/// down.
fn vertical_overlap(a: &Box3D, b: &Box3D) -> f64 {
    let top = (a.t.y - a.h()).max(b.t.y - b.h());
    let bottom = a.t.y.min(b.t.y);
    (bottom - top).max(0.0)
}

pub fn iou_3d(a: &Box3D, b: &Box3D) -> f64 {
    let inter = bev_intersection(a, b) * vertical_overlap(a, b);
    ratio(inter, a.volume(), b.volume())
}

/// Axis-aligned image boxes `left, top, right, bottom`.
pub fn iou_2d(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let w = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let h = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let area = |r: &[f64; 4]| (r[2] - r[0]).max(0.0) * (r[3] - r[1]).max(0.0);
    ratio(w * h, area(a), area(b))
}

/// Fraction of `det` covered by `region`.
pub fn coverage_2d(det: &[f64; 4], region: &[f64; 4]) -> f64 {
    let w = (det[2].min(region[2]) - det[0].max(region[0])).max(0.0);
    let h = (det[3].min(region[3]) - det[1].max(region[1])).max(0.0);
    let area = (det[2] - det[0]) * (det[3] - det[1]);
    if area <= 0.0 {
        0.0
    } else {
        w * h / area
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn bx(x: f64, y: f64, z: f64, h: f64, w: f64, l: f64, yaw: f64) -> Box3D {
        Box3D::new(Vector3::new(h, w, l), Vector3::new(x, y, z), yaw)
    }

    #[test]
    fn identical_and_disjoint() {
        let a = bx(1.0, 1.6, 20.0, 1.5, 1.6, 3.9, 0.4);
        assert!((bev_iou(&a, &a) - 1.0).abs() < 1e-12);
        assert!((iou_3d(&a, &a) - 1.0).abs() < 1e-12);
        let far = bx(21.0, 1.6, 20.0, 1.5, 1.6, 3.9, 0.4);
        assert_eq!(bev_iou(&a, &far), 0.0);
        assert_eq!(iou_3d(&a, &far), 0.0);
    }

    #[test]
    fn vertical_shift_by_height_has_no_volume() {
        let a = bx(0.0, 1.6, 20.0, 1.5, 1.6, 3.9, 0.4);
        let b = bx(0.0, 1.6 - 1.5, 20.0, 1.5, 1.6, 3.9, 0.4);
        assert_eq!(iou_3d(&a, &b), 0.0);
        assert!((bev_iou(&a, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn axis_aligned_closed_form() {
        // yaw 0: length along x, width along z.
        let a = bx(0.0, 2.0, 10.0, 1.5, 2.0, 4.0, 0.0);
        let b = bx(1.0, 2.5, 10.5, 2.0, 2.0, 4.0, 0.0);
        let ix = (2.0f64.min(3.0) - (-2.0f64).max(-1.0)).max(0.0);
        let iz = (11.0f64.min(11.5) - 9.0f64.max(9.5)).max(0.0);
        let iy = (2.0f64.min(2.5) - 0.5f64.max(0.5)).max(0.0);
        let inter = ix * iz * iy;
        let expected = inter / (1.5 * 2.0 * 4.0 + 2.0 * 2.0 * 4.0 - inter);
        assert!((iou_3d(&a, &b) - expected).abs() < 1e-12);
    }

    #[test]
    fn shared_edge_counts_as_zero() {
        let a = bx(0.0, 1.0, 10.0, 1.0, 2.0, 4.0, 0.0);
        let b = bx(4.0, 1.0, 10.0, 1.0, 2.0, 4.0, 0.0);
        assert_eq!(bev_iou(&a, &b), 0.0);
    }

    #[test]
    fn image_boxes() {
        let a = [0.0, 0.0, 10.0, 10.0];
        assert_eq!(iou_2d(&a, &a), 1.0);
        assert_eq!(iou_2d(&a, &[5.0, 0.0, 15.0, 10.0]), 50.0 / 150.0);
        assert_eq!(iou_2d(&a, &[10.0, 0.0, 15.0, 10.0]), 0.0);
        assert_eq!(coverage_2d(&a, &[5.0, 0.0, 100.0, 100.0]), 0.5);
    }

    fn box_strategy() -> impl Strategy<Value = Box3D> {
        (-3.0..3.0f64, 0.5..2.5f64, 8.0..14.0f64, 0.5..2.5f64, 0.5..2.5f64, 1.0..5.0f64, -PI..PI)
            .prop_map(|(x, y, z, h, w, l, yaw)| bx(x, y, z, h, w, l, yaw))
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(a in box_strategy(), b in box_strategy()) {
            for f in [bev_iou, iou_3d] {
                let (ab, ba) = (f(&a, &b), f(&b, &a));
                prop_assert!((ab - ba).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&ab));
            }
            prop_assert!((bev_iou(&a, &a) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn half_turn_symmetry(a in box_strategy(), b in box_strategy()) {
            let flip = |x: &Box3D| Box3D::new(x.dims, x.t, x.yaw + PI);
            prop_assert!((bev_iou(&flip(&a), &flip(&b)) - bev_iou(&a, &b)).abs() < 1e-12);
            // A quarter turn with width and length exchanged is the same rectangle.
            let swap = |x: &Box3D| Box3D::new(Vector3::new(x.h(), x.l(), x.w()), x.t, x.yaw + FRAC_PI_2);
            prop_assert!((bev_iou(&swap(&a), &b) - bev_iou(&a, &b)).abs() < 1e-9);
        }
    }
}
