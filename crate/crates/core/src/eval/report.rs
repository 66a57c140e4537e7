use std::fmt::Write as _;

use super::ap::{curves, match_frame, Difficulty, EvalParams, Frame, Interpolation, Metric};
use crate::par;

/// IoU threshold for image-box matching behind AP_2D and AOS.
pub const IMAGE_IOU: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub difficulty: Difficulty,
    pub iou: f64,
    pub ap_3d: f64,
    pub ap_bev: f64,
    pub ap_2d: f64,
    pub aos: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<MetricsRow>,
    pub interpolation: Interpolation,
    pub frames: usize,
}

fn run(frames: &[Frame], p: &EvalParams) -> (f64, f64) {
    let per = par::map(frames, |f| match_frame(f, p));
    let n_gt = per.iter().map(|(_, n)| n).sum();
    let scored = per.into_iter().flat_map(|(s, _)| s).collect();
    let (curve, aos) = curves(scored, n_gt, p.interpolation);
    (curve.ap, aos)
}

pub fn evaluate(
    frames: &[Frame],
    ious: &[f64],
    difficulties: &[Difficulty],
    interpolation: Interpolation,
) -> EvalReport {
    let mut rows = Vec::new();
    for &difficulty in difficulties {
        let params = |metric, iou| EvalParams {
            interpolation,
            ..EvalParams::new(metric, iou, difficulty)
        };
        let (ap_2d, aos) = run(frames, &params(Metric::Image, IMAGE_IOU));
        for &iou in ious {
            rows.push(MetricsRow {
                difficulty,
                iou,
                ap_3d: run(frames, &params(Metric::Box3D, iou)).0,
                ap_bev: run(frames, &params(Metric::Bev, iou)).0,
                ap_2d,
                aos,
            });
        }
    }
    EvalReport { rows, interpolation, frames: frames.len() }
}

impl EvalReport {
    fn interp_name(&self) -> &'static str {
        match self.interpolation {
            Interpolation::Eleven => "11",
            Interpolation::Forty => "40",
        }
    }

    /// Human-readable table, values in percent.
    pub fn text(&self) -> String {
        let mut s = format!("frames: {}\n", self.frames);
        let _ = writeln!(
            s,
            "interpolation: {}-point recall (published val-split numbers may use either variant)",
            self.interp_name()
        );
        let _ = writeln!(s, "{:<10} {:>5} {:>8} {:>8} {:>8} {:>8}", "difficulty", "iou", "AP_3D", "AP_BEV", "AP_2D", "AOS");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<10} {:>5.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2}",
                r.difficulty.name(),
                r.iou,
                100.0 * r.ap_3d,
                100.0 * r.ap_bev,
                100.0 * r.ap_2d,
                100.0 * r.aos
            );
        }
        s
    }

    /// `key=value` lines, fractions in `[0, 1]`.
    pub fn summary(&self) -> String {
        let mut s = format!("frames={}\ninterpolation={}\n", self.frames, self.interp_name());
        for r in &self.rows {
            let k = format!("{}.iou{:.2}", r.difficulty.name(), r.iou);
            let _ = writeln!(s, "{k}.ap_3d={:.6}", r.ap_3d);
            let _ = writeln!(s, "{k}.ap_bev={:.6}", r.ap_bev);
            let _ = writeln!(s, "{k}.ap_2d={:.6}", r.ap_2d);
            let _ = writeln!(s, "{k}.aos={:.6}", r.aos);
        }
        s
    }
}
