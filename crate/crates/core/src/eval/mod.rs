//! KITTI-style detection metrics.

mod ap;
mod iou;
mod report;

pub use ap::{
    aos, average_precision, curves, match_frame, Difficulty, DifficultyFilter, EvalParams, Frame,
    Interpolation, Metric, PrCurve, Scored,
};
pub use iou::{
    bev_intersection, bev_iou, clip_convex, coverage_2d, iou_2d, iou_3d, polygon_area, AREA_EPS,
};
pub use report::{evaluate, EvalReport, MetricsRow, IMAGE_IOU};

#[cfg(test)]
mod tests;
