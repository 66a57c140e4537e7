//! Two-bin orientation code.
//!
//! Layout per bin `b`: `[4b] = out score, [4b+1] = in score,
//! [4b+2] = sin(α - c_b), [4b+3] = cos(α - c_b)`. The residual of a bin is
//! only written when α lies inside that bin's range.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::geometry::wrap_to_pi;

pub const BIN_CENTERS: [f64; 2] = [-FRAC_PI_2, FRAC_PI_2];

/// Each bin covers `π/2 + BIN_MARGIN` on either side of its center.
pub const BIN_MARGIN: f64 = PI / 6.0;

pub fn multibin_encode(alpha: f64) -> [f64; 8] {
    let d = BIN_CENTERS.map(|c| wrap_to_pi(alpha - c));
    let best = if d[1].abs() < d[0].abs() { 1 } else { 0 };
    let mut code = [0.0; 8];
    for (b, db) in d.iter().enumerate() {
        let o = 4 * b;
        if b == best {
            code[o + 1] = 1.0;
        } else {
            code[o] = 1.0;
        }
        if db.abs() <= FRAC_PI_2 + BIN_MARGIN {
            let (s, c) = db.sin_cos();
            code[o + 2] = s;
            code[o + 3] = c;
        }
    }
    code
}

/// Picks the bin with the larger `in - out` score; ties go to bin 0.
pub fn multibin_decode(code: &[f64; 8]) -> f64 {
    let score = |b: usize| code[4 * b + 1] - code[4 * b];
    let b = if score(1) > score(0) { 1 } else { 0 };
    wrap_to_pi(BIN_CENTERS[b] + code[4 * b + 2].atan2(code[4 * b + 3]))
}
