//! Bird's-eye-view plots as standalone SVG.
//!
//! x points right and z (forward) points up, with the camera at the bottom
//! center. Ground truth is drawn green, estimates blue. Each box gets a tick
//! from its center to the middle of its front face.

use std::fmt::Write as _;

use crate::geometry::Box3D;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BevView {
    /// Pixels per meter.
    pub scale: f64,
    /// Half width of the plotted x range (m).
    pub half_width: f64,
    /// Plotted depth range is `[0, depth]` (m).
    pub depth: f64,
    /// Grid spacing (m).
    pub grid: f64,
}

impl Default for BevView {
    fn default() -> Self {
        Self { scale: 10.0, half_width: 40.0, depth: 80.0, grid: 10.0 }
    }
}

pub const GT_COLOR: &str = "#2ca02c";
pub const RESULT_COLOR: &str = "#1f77b4";

impl BevView {
    pub fn size(&self) -> (f64, f64) {
        (2.0 * self.half_width * self.scale, self.depth * self.scale)
    }

    /// Maps camera `(x, z)` to SVG pixel coordinates.
    pub fn to_px(&self, x: f64, z: f64) -> (f64, f64) {
        ((x + self.half_width) * self.scale, (self.depth - z) * self.scale)
    }
}

fn push_box(s: &mut String, view: &BevView, b: &Box3D, color: &str) {
    let pts: Vec<String> = b
        .bev_corners()
        .iter()
        .map(|c| {
            let (x, y) = view.to_px(c.x, c.y);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        s,
        r#"<polygon points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
        pts.join(" ")
    );
    let (sin, cos) = b.yaw.sin_cos();
    let half = 0.5 * b.l();
    let (x0, y0) = view.to_px(b.t.x, b.t.z);
    let (x1, y1) = view.to_px(b.t.x + half * cos, b.t.z - half * sin);
    let _ = writeln!(
        s,
        r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}" stroke="{color}" stroke-width="1.5"/>"#
    );
}

pub fn render_bev(gt: &[Box3D], results: &[Box3D], view: &BevView) -> String {
    let (w, h) = view.size();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    );
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{w:.0}" height="{h:.0}" fill="#ffffff"/>"##);
    let _ = writeln!(s, r##"<g id="grid" stroke="#d0d0d0" stroke-width="0.5">"##);
    let n_x = (2.0 * view.half_width / view.grid).floor() as i64;
    for i in 0..=n_x {
        let x = -view.half_width + i as f64 * view.grid;
        let (px, _) = view.to_px(x, 0.0);
        let _ = writeln!(s, r#"<line x1="{px:.2}" y1="0.00" x2="{px:.2}" y2="{h:.2}"/>"#);
    }
    let n_z = (view.depth / view.grid).floor() as i64;
    for i in 0..=n_z {
        let (_, py) = view.to_px(0.0, i as f64 * view.grid);
        let _ = writeln!(s, r#"<line x1="0.00" y1="{py:.2}" x2="{w:.2}" y2="{py:.2}"/>"#);
    }
    let _ = writeln!(s, "</g>");
    let (cx, cy) = view.to_px(0.0, 0.0);
    let _ = writeln!(s, r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="#000000"/>"##);

    let _ = writeln!(s, r#"<g id="ground-truth">"#);
    for b in gt {
        push_box(&mut s, view, b, GT_COLOR);
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g id="results">"#);
    for b in results {
        push_box(&mut s, view, b, RESULT_COLOR);
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}
