//! KITTI object labels, detection results and calibration files.

use std::fmt::Write as _;

use nalgebra::Vector3;
use thiserror::Error;

use crate::geometry::{box_points_3d, yaw_to_alpha, Box3D, CameraModel, MIN_DEPTH};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KittiError {
    #[error("line {line}: expected 15 or 16 fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: cannot parse field {field} ({value:?}) as a number")]
    NumericParse { line: usize, field: usize, value: String },
    #[error("calibration has no P2 line")]
    MissingP2,
    #[error("invalid calibration: {0}")]
    InvalidCalib(String),
    #[error("input is not valid UTF-8")]
    Utf8,
}

pub const DONT_CARE: &str = "DontCare";

#[derive(Debug, Clone, PartialEq)]
pub struct KittiLabel {
    pub kind: String,
    pub truncated: f64,
    pub occluded: i32,
    pub alpha: f64,
    /// `left, top, right, bottom` in pixels.
    pub bbox: [f64; 4],
    /// `h, w, l` in meters.
    pub dims: [f64; 3],
    /// Bottom-face center in camera coordinates.
    pub location: [f64; 3],
    pub rotation_y: f64,
    pub score: Option<f64>,
}

impl KittiLabel {
    pub fn is_dontcare(&self) -> bool {
        self.kind == DONT_CARE
    }

    pub fn bbox_height(&self) -> f64 {
        self.bbox[3] - self.bbox[1]
    }
}

fn parse_num(line: usize, field: usize, s: &str) -> Result<f64, KittiError> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| KittiError::NumericParse { line, field, value: s.to_string() })
}

fn parse_label_line(line: usize, text: &str) -> Result<KittiLabel, KittiError> {
    let f: Vec<&str> = text.split_whitespace().collect();
    if f.len() != 15 && f.len() != 16 {
        return Err(KittiError::FieldCount { line, found: f.len() });
    }
    let mut v = [0.0; 16];
    for (i, s) in f.iter().enumerate().skip(1) {
        if i != 2 {
            v[i] = parse_num(line, i + 1, s)?;
        }
    }
    let occluded = f[2]
        .parse::<i32>()
        .map_err(|_| KittiError::NumericParse { line, field: 3, value: f[2].to_string() })?;
    Ok(KittiLabel {
        kind: f[0].to_string(),
        truncated: v[1],
        occluded,
        alpha: v[3],
        bbox: [v[4], v[5], v[6], v[7]],
        dims: [v[8], v[9], v[10]],
        location: [v[11], v[12], v[13]],
        rotation_y: v[14],
        score: (f.len() == 16).then_some(v[15]),
    })
}

/// Parses a label or result file. Blank lines are skipped; errors carry the
/// 1-based line number.
pub fn parse_label_file(text: &str) -> Result<Vec<KittiLabel>, KittiError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_label_line(i + 1, l))
        .collect()
}

pub fn parse_label_bytes(bytes: &[u8]) -> Result<Vec<KittiLabel>, KittiError> {
    parse_label_file(std::str::from_utf8(bytes).map_err(|_| KittiError::Utf8)?)
}

fn push_fixed(out: &mut String, v: f64) {
    let s = format!("{v:.2}");
    out.push(' ');
    out.push_str(if s == "-0.00" { "0.00" } else { &s });
}

/// One label line with two-decimal floats; the score column is written when
/// present.
pub fn format_label(l: &KittiLabel) -> String {
    let mut s = l.kind.clone();
    push_fixed(&mut s, l.truncated);
    let _ = write!(s, " {}", l.occluded);
    for v in [l.alpha]
        .iter()
        .chain(&l.bbox)
        .chain(&l.dims)
        .chain(&l.location)
        .chain([l.rotation_y].iter())
        .chain(l.score.iter())
    {
        push_fixed(&mut s, *v);
    }
    s
}

pub fn write_label_file(labels: &[KittiLabel]) -> String {
    labels.iter().map(|l| format_label(l) + "\n").collect()
}

/// Result files carry a score on every line; missing scores are written as 1.
pub fn write_result_file(detections: &[KittiLabel]) -> String {
    detections
        .iter()
        .map(|d| format_label(&KittiLabel { score: Some(d.score.unwrap_or(1.0)), ..d.clone() }) + "\n")
        .collect()
}

/// Left color camera projection matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KittiCalib {
    pub p2: [[f64; 4]; 3],
}

impl KittiCalib {
    pub fn from_camera(cam: &CameraModel) -> Self {
        let t = cam.t_cam;
        Self {
            p2: [
                [cam.fx, 0.0, cam.cx, cam.fx * t.x + cam.cx * t.z],
                [0.0, cam.fy, cam.cy, cam.fy * t.y + cam.cy * t.z],
                [0.0, 0.0, 1.0, t.z],
            ],
        }
    }
}

pub fn parse_calib(text: &str) -> Result<KittiCalib, KittiError> {
    for (i, line) in text.lines().enumerate() {
        let Some(rest) = line.trim_start().strip_prefix("P2:") else { continue };
        let vals: Vec<&str> = rest.split_whitespace().collect();
        if vals.len() != 12 {
            return Err(KittiError::InvalidCalib(format!("P2 has {} values", vals.len())));
        }
        let mut p2 = [[0.0; 4]; 3];
        for (j, s) in vals.iter().enumerate() {
            p2[j / 4][j % 4] = parse_num(i + 1, j + 2, s)?;
        }
        if !(p2[0][0] > 0.0 && p2[1][1] > 0.0) {
            return Err(KittiError::InvalidCalib("non-positive focal length".into()));
        }
        return Ok(KittiCalib { p2 });
    }
    Err(KittiError::MissingP2)
}

pub fn parse_calib_bytes(bytes: &[u8]) -> Result<KittiCalib, KittiError> {
    parse_calib(std::str::from_utf8(bytes).map_err(|_| KittiError::Utf8)?)
}

/// `7.215377000000e+02` style, as in the benchmark's calibration files.
fn sci(v: f64) -> String {
    let s = format!("{v:.12e}");
    let (mant, exp) = s.split_once('e').expect("exponent");
    let e: i32 = exp.parse().expect("integer exponent");
    format!("{mant}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
}

/// Calibration text with P2 repeated as P0..P3 so standard readers accept it.
pub fn write_calib(calib: &KittiCalib) -> String {
    let row: Vec<String> = calib.p2.iter().flatten().map(|v| sci(*v)).collect();
    let row = row.join(" ");
    (0..4).map(|i| format!("P{i}: {row}\n")).collect()
}

/// Intrinsics and the translation column of P2 as a camera-frame offset,
/// solved exactly from `P[:,3] = K t`.
pub fn to_camera_model(calib: &KittiCalib) -> CameraModel {
    let p = &calib.p2;
    let (fx, fy, cx, cy) = (p[0][0], p[1][1], p[0][2], p[1][2]);
    let tz = p[2][3];
    CameraModel::new(fx, fy, cx, cy).with_offset(Vector3::new(
        (p[0][3] - cx * tz) / fx,
        (p[1][3] - cy * tz) / fy,
        tz,
    ))
}

pub fn label_to_box3d(l: &KittiLabel) -> Box3D {
    Box3D::new(Vector3::from(l.dims), Vector3::from(l.location), l.rotation_y)
}

/// Label for a box with `alpha` derived from its position; truncation and
/// occlusion are left at zero.
pub fn box3d_to_label(b: &Box3D, kind: &str, bbox: [f64; 4], score: Option<f64>) -> KittiLabel {
    KittiLabel {
        kind: kind.to_string(),
        truncated: 0.0,
        occluded: 0,
        alpha: yaw_to_alpha(b.yaw, &b.t),
        bbox,
        dims: b.dims.into(),
        location: b.t.into(),
        rotation_y: b.yaw,
        score,
    }
}

/// Image-space box of the projected corners clipped to a `width×height`
/// image, with the truncation ratio `1 - clipped area / full area`. `None`
/// when a corner is behind the camera or nothing is left after clipping.
pub fn image_bbox(b: &Box3D, cam: &CameraModel, width: f64, height: f64) -> Option<([f64; 4], f64)> {
    let pts = box_points_3d(b);
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in &pts[..8] {
        if cam.to_camera(p).z <= MIN_DEPTH {
            return None;
        }
        let uv = cam.project(p).ok()?;
        for i in 0..2 {
            lo[i] = lo[i].min(uv[i]);
            hi[i] = hi[i].max(uv[i]);
        }
    }
    let full = (hi[0] - lo[0]) * (hi[1] - lo[1]);
    let clipped = [lo[0].max(0.0), lo[1].max(0.0), hi[0].min(width), hi[1].min(height)];
    if clipped[2] <= clipped[0] || clipped[3] <= clipped[1] {
        return None;
    }
    let area = (clipped[2] - clipped[0]) * (clipped[3] - clipped[1]);
    Some((clipped, (1.0 - area / full).max(0.0)))
}
