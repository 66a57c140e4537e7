use nalgebra::{Vector2, Vector3};

use super::encode::{decode_dims, DimEncoding};
use super::gaussian::{adaptive_sigma, GaussianSpec};
use super::multibin::multibin_decode;
use super::{HeadMaps, Tensor, STRIDE};
use crate::geometry::{KeypointSet, NUM_KEYPOINTS};

/// A local maximum of one heatmap channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub channel: usize,
    pub x: usize,
    pub y: usize,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeConfig {
    pub stride: usize,
    pub main_threshold: f64,
    pub kp_threshold: f64,
    /// Peaks kept per channel.
    pub topk: usize,
    pub gaussian: GaussianSpec,
    /// Keypoint match radius in grid cells. `None` uses `2 + σ` for the
    /// object's regressed extent.
    pub match_radius: Option<f64>,
    pub dims: DimEncoding,
    /// Confidence of an unmatched keypoint relative to the maincenter score.
    pub fallback_conf: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            stride: STRIDE,
            main_threshold: 0.4,
            kp_threshold: 0.1,
            topk: 100,
            gaussian: GaussianSpec::default(),
            match_radius: None,
            dims: DimEncoding::default(),
            fallback_conf: 0.1,
        }
    }
}

/// One decoded object. Positions are input-image pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupedObject {
    pub center: Vector2<f64>,
    pub score: f64,
    pub class: usize,
    pub kps: KeypointSet,
    pub dims: Vector3<f64>,
    pub alpha: f64,
    pub depth: f64,
}

/// Cells that equal the maximum of their 3×3 neighbourhood and reach
/// `threshold`. On plateaus only the first cell in raster order counts.
/// Each channel keeps its `topk` best; the result is sorted by score.
pub fn extract_peaks(map: &Tensor, threshold: f64, topk: usize) -> Vec<Peak> {
    let (h, w) = (map.height(), map.width());
    let mut out = Vec::new();
    for c in 0..map.channels() {
        let plane = map.channel(c);
        let mut found = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let v = plane[y * w + x];
                if !(v >= threshold) {
                    continue;
                }
                let mut is_peak = true;
                'nb: for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                        if (ny, nx) == (y, x) {
                            continue;
                        }
                        let n = plane[ny * w + nx];
                        let before = (ny, nx) < (y, x);
                        if n > v || (before && n == v) {
                            is_peak = false;
                            break 'nb;
                        }
                    }
                }
                if is_peak {
                    found.push(Peak { channel: c, x, y, score: v });
                }
            }
        }
        found.sort_by(|a, b| b.score.total_cmp(&a.score));
        found.truncate(topk);
        out.extend(found);
    }
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    out
}

/// Assembles objects: for every maincenter peak the regressed keypoint
/// positions select the nearest keypoint peak of the same type within the
/// match radius; unmatched keypoints keep the regressed position and are
/// marked invisible.
pub fn group_keypoints(
    main_peaks: &[Peak],
    vertex_peaks: &[Peak],
    maps: &HeadMaps,
    cfg: &DecodeConfig,
) -> Vec<GroupedObject> {
    let s = cfg.stride as f64;
    let layout = maps.vos_layout();
    let refined: Vec<(usize, Vector2<f64>, f64)> = vertex_peaks
        .iter()
        .map(|p| {
            let c = layout.channel_of(p.channel);
            let off = Vector2::new(maps.vos.get(c, p.y, p.x), maps.vos.get(c + 1, p.y, p.x));
            (p.channel, Vector2::new(p.x as f64, p.y as f64) + off, p.score)
        })
        .collect();

    main_peaks
        .iter()
        .map(|m| {
            let (x, y) = (m.x, m.y);
            let mc = Vector2::new(x as f64 + maps.mos.get(0, y, x), y as f64 + maps.mos.get(1, y, x));
            let regressed: [Vector2<f64>; NUM_KEYPOINTS] = std::array::from_fn(|k| {
                mc + Vector2::new(maps.vc.get(2 * k, y, x), maps.vc.get(2 * k + 1, y, x))
            });
            let radius = cfg.match_radius.unwrap_or_else(|| {
                let (lo, hi) = regressed[..8].iter().fold(
                    (Vector2::repeat(f64::INFINITY), Vector2::repeat(f64::NEG_INFINITY)),
                    |(lo, hi), p| (lo.inf(p), hi.sup(p)),
                );
                let extent = (hi - lo) * s;
                2.0 + adaptive_sigma(extent.x * extent.y, &cfg.gaussian)
            });

            let mut kps = KeypointSet::new(regressed.map(|p| p * s));
            for k in 0..NUM_KEYPOINTS {
                let best = refined
                    .iter()
                    .filter(|(c, _, _)| *c == k)
                    .map(|(_, p, score)| ((p - regressed[k]).norm(), p, score))
                    .min_by(|a, b| a.0.total_cmp(&b.0));
                match best {
                    Some((d, p, score)) if d <= radius => {
                        kps.pts[k] = p * s;
                        kps.conf[k] = *score;
                    }
                    _ => {
                        kps.visible[k] = false;
                        kps.conf[k] = cfg.fallback_conf * m.score;
                    }
                }
            }

            let code: [f64; 8] = std::array::from_fn(|i| maps.ori.get(i, y, x));
            let dim_code = Vector3::from_fn(|i, _| maps.dim.get(i, y, x));
            GroupedObject {
                center: mc * s,
                score: m.score,
                class: m.channel,
                kps,
                dims: decode_dims(&dim_code, &cfg.dims),
                alpha: multibin_decode(&code),
                depth: maps.depth.get(0, y, x).exp(),
            }
        })
        .collect()
}

/// Peak extraction followed by grouping, with the configured thresholds.
pub fn decode_headmaps(maps: &HeadMaps, cfg: &DecodeConfig) -> Vec<GroupedObject> {
    let main = extract_peaks(&maps.main, cfg.main_threshold, cfg.topk);
    let vertex = extract_peaks(&maps.vertex, cfg.kp_threshold, cfg.topk);
    group_keypoints(&main, &vertex, maps, cfg)
}
