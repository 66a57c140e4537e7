//! Synthetic scenes: random cars in front of a camera, their projected
//! keypoints, optional priors and noise.
//!
//! Ground-truth positions, dimensions and yaws are quantized to 0.01 so that
//! the two-decimal label files written for a scene are exact.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::eval::bev_intersection;
use crate::geometry::{box_points_3d, wrap_to_pi, yaw_to_alpha, Box3D, CameraModel, KeypointSet, NUM_KEYPOINTS};
use crate::heatmap::{encode_objects, EncodeConfig, HeadMaps, HeatmapError, Masks, ObjectTarget};
use crate::kitti::{box3d_to_label, image_bbox, KittiLabel};
use crate::par;
use crate::solver::{required_keypoints, Priors, MEAN_CAR_DIMS, STD_CAR_DIMS};

pub const IMAGE_WIDTH: f64 = 1280.0;
pub const IMAGE_HEIGHT: f64 = 384.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSpec {
    pub n_objects: usize,
    /// Depth of the box bottom center (m).
    pub depth_range: (f64, f64),
    pub lateral_range: (f64, f64),
    /// Height of the box bottom below the camera (m).
    pub ground_range: (f64, f64),
    /// Yaw is uniform over this interval.
    pub yaw_range: (f64, f64),
    pub dims_mean: [f64; 3],
    /// Dimensions are normal with this deviation, truncated at 3σ.
    pub dims_std: [f64; 3],
    /// Reject placements whose maincenter or same-type keypoints would share
    /// a heat-map neighbourhood with an earlier object.
    pub separable: bool,
    /// Grid stride used by `separable`.
    pub stride: f64,
    pub max_attempts: usize,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            n_objects: 8,
            depth_range: (5.0, 60.0),
            lateral_range: (-15.0, 15.0),
            ground_range: (1.5, 1.8),
            yaw_range: (-PI, PI),
            dims_mean: MEAN_CAR_DIMS,
            dims_std: STD_CAR_DIMS,
            separable: true,
            stride: 4.0,
            max_attempts: 200,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn is_valid(&self) -> bool {
        let ordered = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a <= b;
        ordered(self.depth_range)
            && self.depth_range.0 > 0.0
            && ordered(self.lateral_range)
            && ordered(self.ground_range)
            && ordered(self.yaw_range)
            && self.dims_mean.iter().zip(&self.dims_std).all(|(m, s)| *s >= 0.0 && m - 3.0 * s > 0.0)
            && self.stride > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Pixel noise standard deviation.
    pub sigma_px: f64,
    /// Probability of dropping a visible keypoint.
    pub dropout: f64,
    pub dims_sigma: f64,
    pub yaw_sigma: f64,
    /// Depth prior noise relative to depth.
    pub depth_rel_sigma: f64,
    /// Lower bound of the reported keypoint confidence.
    pub conf_floor: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { sigma_px: 0.0, dropout: 0.0, dims_sigma: 0.0, yaw_sigma: 0.0, depth_rel_sigma: 0.0, conf_floor: 0.05 }
    }
}

impl NoiseSpec {
    pub fn pixels(sigma_px: f64) -> Self {
        Self { sigma_px, ..Self::default() }
    }

    pub fn is_valid(&self) -> bool {
        [self.sigma_px, self.dims_sigma, self.yaw_sigma, self.depth_rel_sigma].iter().all(|s| *s >= 0.0)
            && (0.0..1.0).contains(&self.dropout)
            && (0.0..=1.0).contains(&self.conf_floor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneObject {
    pub gt: Box3D,
    /// Image box clipped to the image.
    pub bbox: [f64; 4],
    pub truncation: f64,
    /// 0 fully visible, 1 partly, 2 largely occluded by nearer objects.
    pub occlusion: i32,
    pub kps: KeypointSet,
    pub priors: Priors,
    /// Enough keypoints for the solver.
    pub usable: bool,
}

impl SceneObject {
    pub fn label(&self) -> KittiLabel {
        KittiLabel {
            truncated: q(self.truncation),
            occluded: self.occlusion,
            alpha: q(yaw_to_alpha(self.gt.yaw, &self.gt.t)),
            bbox: self.bbox.map(q),
            ..box3d_to_label(&self.gt, "Car", self.bbox, None)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub camera: CameraModel,
    pub width: f64,
    pub height: f64,
    pub objects: Vec<SceneObject>,
}

fn q(v: f64) -> f64 {
    let r = (v * 100.0).round() / 100.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Projects the nine keypoints; those behind the camera or outside the
/// `width×height` image are invisible.
pub fn observe(b: &Box3D, cam: &CameraModel, width: f64, height: f64) -> KeypointSet {
    let pts = box_points_3d(b);
    let mut kps = KeypointSet::new([Vector2::zeros(); NUM_KEYPOINTS]);
    for (k, p) in pts.iter().enumerate() {
        match cam.project(p) {
            Ok(uv) => {
                kps.pts[k] = uv;
                kps.visible[k] = uv.x >= 0.0 && uv.y >= 0.0 && uv.x < width && uv.y < height;
            }
            Err(_) => kps.visible[k] = false,
        }
        if !kps.visible[k] {
            kps.conf[k] = 0.0;
        }
    }
    kps
}

fn exact_priors(b: &Box3D) -> Priors {
    Priors { dims: Some(b.dims), yaw: Some(b.yaw), depth: Some(b.t.z) }
}

fn is_usable(kps: &KeypointSet, priors: &Priors) -> bool {
    kps.visible_count() >= required_keypoints(priors)
}

/// Builds a scene object for a box, or `None` when it is not in view.
pub fn make_object(b: &Box3D, cam: &CameraModel, width: f64, height: f64) -> Option<SceneObject> {
    let (bbox, truncation) = image_bbox(b, cam, width, height)?;
    let kps = observe(b, cam, width, height);
    let priors = exact_priors(b);
    Some(SceneObject { gt: *b, bbox, truncation, occlusion: 0, kps, priors, usable: is_usable(&kps, &priors) })
}

fn sample_box(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Box3D {
    let mut dims = [0.0; 3];
    for i in 0..3 {
        let n = Normal::new(spec.dims_mean[i], spec.dims_std[i].max(f64::MIN_POSITIVE)).expect("finite");
        let lo = spec.dims_mean[i] - 3.0 * spec.dims_std[i];
        let hi = spec.dims_mean[i] + 3.0 * spec.dims_std[i];
        dims[i] = loop {
            let v = n.sample(rng);
            if (lo..=hi).contains(&v) {
                break v;
            }
        };
    }
    let range = |rng: &mut ChaCha8Rng, (a, b): (f64, f64)| if a < b { rng.random_range(a..b) } else { a };
    let x = range(rng, spec.lateral_range);
    let y = range(rng, spec.ground_range);
    let z = range(rng, spec.depth_range);
    let yaw = range(rng, spec.yaw_range);
    // largest two-decimal value inside [-pi, pi]
    let lim = (PI * 100.0).floor() / 100.0;
    Box3D::new(
        Vector3::from(dims.map(|d| q(d).max(0.01))),
        Vector3::new(q(x), q(y), q(z)),
        q(wrap_to_pi(yaw)).clamp(-lim, lim),
    )
}

fn cell(p: &Vector2<f64>, stride: f64) -> (i64, i64) {
    ((p.x / stride).floor() as i64, (p.y / stride).floor() as i64)
}

fn near(a: (i64, i64), b: (i64, i64)) -> bool {
    (a.0 - b.0).abs() <= 1 && (a.1 - b.1).abs() <= 1
}

fn separable(o: &SceneObject, others: &[SceneObject], stride: f64) -> bool {
    let center = |o: &SceneObject| Vector2::new(0.5 * (o.bbox[0] + o.bbox[2]), 0.5 * (o.bbox[1] + o.bbox[3]));
    others.iter().all(|other| {
        if near(cell(&center(o), stride), cell(&center(other), stride)) {
            return false;
        }
        (0..NUM_KEYPOINTS).all(|k| {
            !(o.kps.visible[k]
                && other.kps.visible[k]
                && near(cell(&o.kps.pts[k], stride), cell(&other.kps.pts[k], stride)))
        })
    })
}

/// Fraction of `b`'s image box covered by the boxes of nearer objects, on a
/// 16×16 sample lattice.
fn occluded_fraction(o: &SceneObject, all: &[SceneObject]) -> f64 {
    let nearer: Vec<&[f64; 4]> =
        all.iter().filter(|x| x.gt.t.z < o.gt.t.z).map(|x| &x.bbox).collect();
    if nearer.is_empty() {
        return 0.0;
    }
    let b = &o.bbox;
    let mut hit = 0;
    for i in 0..16 {
        for j in 0..16 {
            let u = b[0] + (b[2] - b[0]) * (i as f64 + 0.5) / 16.0;
            let v = b[1] + (b[3] - b[1]) * (j as f64 + 0.5) / 16.0;
            if nearer.iter().any(|r| u >= r[0] && u <= r[2] && v >= r[1] && v <= r[3]) {
                hit += 1;
            }
        }
    }
    hit as f64 / 256.0
}

/// Random scene, deterministic in `spec.seed`. Objects are placed with
/// disjoint footprints and must appear in the image; placements that fail
/// after `max_attempts` tries are dropped, so a crowded spec may yield fewer
/// objects than requested.
pub fn generate_scene(spec: &SceneSpec, cam: &CameraModel) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut objects: Vec<SceneObject> = Vec::with_capacity(spec.n_objects);
    for _ in 0..spec.n_objects {
        for _ in 0..spec.max_attempts {
            let b = sample_box(spec, &mut rng);
            if objects.iter().any(|o| bev_intersection(&o.gt, &b) > 0.0) {
                continue;
            }
            let Some(o) = make_object(&b, cam, IMAGE_WIDTH, IMAGE_HEIGHT) else { continue };
            if spec.separable && !separable(&o, &objects, spec.stride) {
                continue;
            }
            objects.push(o);
            break;
        }
    }
    let fractions: Vec<f64> = objects.iter().map(|o| occluded_fraction(o, &objects)).collect();
    for (o, f) in objects.iter_mut().zip(fractions) {
        o.occlusion = if f < 0.1 { 0 } else if f < 0.5 { 1 } else { 2 };
    }
    Scene { camera: *cam, width: IMAGE_WIDTH, height: IMAGE_HEIGHT, objects }
}

/// `count` scenes with seeds `spec.seed, spec.seed + 1, ...`.
pub fn generate_scenes(spec: &SceneSpec, cam: &CameraModel, count: usize) -> Vec<Scene> {
    par::map_range(count, |i| {
        generate_scene(&SceneSpec { seed: spec.seed.wrapping_add(i as u64), ..*spec }, cam)
    })
}

/// Adds keypoint and prior noise. Confidence decays with the drawn offset,
/// `exp(-|n|² / 2σ²)` clipped to `[conf_floor, 1]`. Keypoints pushed out of
/// the image or dropped become invisible.
pub fn apply_noise(scene: &Scene, noise: &NoiseSpec, seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = scene.clone();
    for o in &mut out.objects {
        for k in 0..NUM_KEYPOINTS {
            let n = Vector2::new(std_normal.sample(&mut rng), std_normal.sample(&mut rng)) * noise.sigma_px;
            let drop = rng.random::<f64>() < noise.dropout;
            if !o.kps.visible[k] {
                continue;
            }
            let p = o.kps.pts[k] + n;
            o.kps.pts[k] = p;
            o.kps.conf[k] = if noise.sigma_px > 0.0 {
                (-n.norm_squared() / (2.0 * noise.sigma_px * noise.sigma_px)).exp().clamp(noise.conf_floor, 1.0)
            } else {
                1.0
            };
            if drop || p.x < 0.0 || p.y < 0.0 || p.x >= scene.width || p.y >= scene.height {
                o.kps.visible[k] = false;
                o.kps.conf[k] = 0.0;
            }
        }
        let (dn, yn, zn) = (
            Vector3::from_fn(|_, _| std_normal.sample(&mut rng)),
            std_normal.sample(&mut rng),
            std_normal.sample(&mut rng),
        );
        if let Some(d) = o.priors.dims.as_mut() {
            *d = (*d + dn * noise.dims_sigma).map(|v| v.max(0.1));
        }
        if let Some(y) = o.priors.yaw.as_mut() {
            *y = wrap_to_pi(*y + yn * noise.yaw_sigma);
        }
        if let Some(z) = o.priors.depth.as_mut() {
            *z = (*z * (1.0 + zn * noise.depth_rel_sigma)).max(0.1);
        }
        o.usable = is_usable(&o.kps, &o.priors);
    }
    out
}

/// Head-map targets for the scene's in-view objects, written far to near.
pub fn encode_headmaps(scene: &Scene, cfg: &EncodeConfig) -> Result<(HeadMaps, Masks), HeatmapError> {
    let mut order: Vec<&SceneObject> = scene.objects.iter().collect();
    order.sort_by(|a, b| b.gt.t.z.total_cmp(&a.gt.t.z));
    let targets: Vec<ObjectTarget> = order
        .iter()
        .map(|o| ObjectTarget {
            class: 0,
            center: Vector2::new(0.5 * (o.bbox[0] + o.bbox[2]), 0.5 * (o.bbox[1] + o.bbox[3])),
            area: (o.bbox[2] - o.bbox[0]) * (o.bbox[3] - o.bbox[1]),
            kps: o.kps,
            dims: o.gt.dims,
            alpha: yaw_to_alpha(o.gt.yaw, &o.gt.t),
            depth: o.gt.t.z,
        })
        .collect();
    let s = cfg.stride as f64;
    let (h, w) = ((scene.height / s).ceil() as usize, (scene.width / s).ceil() as usize);
    encode_objects(&targets, h, w, cfg)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {msg}")]
pub struct FormatError {
    pub line: usize,
    pub msg: String,
}

/// One line per object: nine `u v conf` triples, `conf = 0` for invisible
/// keypoints.
pub fn write_keypoints(kps: &[KeypointSet]) -> String {
    let mut s = String::new();
    for k in kps {
        let fields: Vec<String> = (0..NUM_KEYPOINTS)
            .map(|i| {
                let c = if k.visible[i] { k.conf[i].max(f64::MIN_POSITIVE) } else { 0.0 };
                format!("{} {} {}", k.pts[i].x, k.pts[i].y, c)
            })
            .collect();
        let _ = writeln!(s, "{}", fields.join(" "));
    }
    s
}

fn numbers(line: usize, text: &str, expected: usize) -> Result<Vec<Option<f64>>, FormatError> {
    let f: Vec<&str> = text.split_whitespace().collect();
    if f.len() != expected {
        return Err(FormatError { line, msg: format!("expected {expected} fields, found {}", f.len()) });
    }
    f.iter()
        .map(|s| {
            if *s == "-" {
                return Ok(None);
            }
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Some)
                .ok_or_else(|| FormatError { line, msg: format!("bad number {s:?}") })
        })
        .collect()
}

pub fn parse_keypoints(text: &str) -> Result<Vec<KeypointSet>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v = numbers(i + 1, line, 3 * NUM_KEYPOINTS)?;
        if v.iter().any(Option::is_none) {
            return Err(FormatError { line: i + 1, msg: "missing value".into() });
        }
        let v: Vec<f64> = v.into_iter().flatten().collect();
        let mut k = KeypointSet::new(std::array::from_fn(|j| Vector2::new(v[3 * j], v[3 * j + 1])));
        for j in 0..NUM_KEYPOINTS {
            let c = v[3 * j + 2];
            if !(0.0..=1.0).contains(&c) {
                return Err(FormatError { line: i + 1, msg: format!("confidence {c} outside [0, 1]") });
            }
            k.conf[j] = c;
            k.visible[j] = c > 0.0;
        }
        out.push(k);
    }
    Ok(out)
}

/// One line per object: `h w l yaw depth`, `-` for an absent prior.
pub fn write_priors(priors: &[Priors]) -> String {
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| x.to_string());
    priors
        .iter()
        .map(|p| {
            let d = p.dims.map(|d| [d.x, d.y, d.z]);
            format!(
                "{} {} {} {} {}\n",
                opt(d.map(|d| d[0])),
                opt(d.map(|d| d[1])),
                opt(d.map(|d| d[2])),
                opt(p.yaw),
                opt(p.depth)
            )
        })
        .collect()
}

pub fn parse_priors(text: &str) -> Result<Vec<Priors>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v = numbers(i + 1, line, 5)?;
        let dims = match (v[0], v[1], v[2]) {
            (Some(h), Some(w), Some(l)) => Some(Vector3::new(h, w, l)),
            (None, None, None) => None,
            _ => return Err(FormatError { line: i + 1, msg: "partial dimension prior".into() }),
        };
        let p = Priors { dims, yaw: v[3], depth: v[4] };
        if !p.is_valid() {
            return Err(FormatError { line: i + 1, msg: "non-positive prior".into() });
        }
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heatmap::{decode_headmaps, DecodeConfig, VosLayout};
    use crate::kitti::{parse_label_file, write_label_file};

    fn cam() -> CameraModel {
        CameraModel::kitti_p2()
    }

    #[test]
    fn deterministic() {
        let spec = SceneSpec { seed: 42, ..Default::default() };
        let a = generate_scene(&spec, &cam());
        let b = generate_scene(&spec, &cam());
        assert_eq!(a, b);
        assert!(!a.objects.is_empty());
        let c = generate_scene(&SceneSpec { seed: 43, ..spec }, &cam());
        assert_ne!(a, c);
        let many = generate_scenes(&spec, &cam(), 3);
        assert_eq!(many[0], a);
        assert_eq!(many[1], c);
    }

    #[test]
    fn ground_truth_is_quantized_and_disjoint() {
        let s = generate_scene(&SceneSpec { n_objects: 12, seed: 7, ..Default::default() }, &cam());
        for (i, o) in s.objects.iter().enumerate() {
            for v in o.gt.dims.iter().chain(o.gt.t.iter()).chain([o.gt.yaw].iter()) {
                assert!((v * 100.0 - (v * 100.0).round()).abs() < 1e-9);
            }
            for other in &s.objects[i + 1..] {
                assert_eq!(bev_intersection(&o.gt, &other.gt), 0.0);
            }
            for k in 0..9 {
                if o.kps.visible[k] {
                    let p = o.kps.pts[k];
                    assert!(p.x >= 0.0 && p.x < IMAGE_WIDTH && p.y >= 0.0 && p.y < IMAGE_HEIGHT);
                }
            }
        }
        let labels: Vec<KittiLabel> = s.objects.iter().map(|o| o.label()).collect();
        let back = parse_label_file(&write_label_file(&labels)).unwrap();
        for (a, b) in back.iter().zip(&labels) {
            assert_eq!(a.location, b.location);
            assert_eq!(a.dims, b.dims);
            assert_eq!(a.rotation_y, b.rotation_y);
        }
    }

    #[test]
    fn box_behind_camera_is_unusable() {
        let b = Box3D::new(Vector3::new(1.5, 1.6, 3.9), Vector3::new(0.0, 1.6, -5.0), 0.0);
        let kps = observe(&b, &cam(), IMAGE_WIDTH, IMAGE_HEIGHT);
        assert_eq!(kps.visible_count(), 0);
        assert!(make_object(&b, &cam(), IMAGE_WIDTH, IMAGE_HEIGHT).is_none());
        assert!(!is_usable(&kps, &exact_priors(&b)));
    }

    #[test]
    fn zero_noise_is_identity() {
        let s = generate_scene(&SceneSpec { seed: 1, ..Default::default() }, &cam());
        assert_eq!(apply_noise(&s, &NoiseSpec::default(), 9), s);
    }

    #[test]
    fn pixel_noise_has_requested_spread() {
        let spec = SceneSpec { n_objects: 10, seed: 2, depth_range: (15.0, 40.0), lateral_range: (-6.0, 6.0), ..Default::default() };
        let mut offsets = Vec::new();
        let mut seed = 0;
        while offsets.len() < 20_000 {
            let s = generate_scene(&SceneSpec { seed, ..spec }, &cam());
            let n = apply_noise(&s, &NoiseSpec::pixels(2.0), seed + 1000);
            for (a, b) in s.objects.iter().zip(&n.objects) {
                for k in 0..9 {
                    if a.kps.visible[k] && b.kps.visible[k] {
                        let d = b.kps.pts[k] - a.kps.pts[k];
                        offsets.extend([d.x, d.y]);
                        assert!(b.kps.conf[k] >= 0.05 && b.kps.conf[k] <= 1.0);
                    }
                }
            }
            seed += 1;
        }
        let n = offsets.len() as f64;
        let mean = offsets.iter().sum::<f64>() / n;
        let std = (offsets.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((std - 2.0).abs() < 0.1, "{std}");
    }

    #[test]
    fn heavy_dropout_hides_nearly_everything() {
        let s = generate_scene(&SceneSpec { n_objects: 10, seed: 3, ..Default::default() }, &cam());
        let noise = NoiseSpec { dropout: 1.0 - 1e-9, ..Default::default() };
        let n = apply_noise(&s, &noise, 4);
        assert!(n.objects.iter().all(|o| o.kps.visible_count() == 0 && !o.usable));
    }

    #[test]
    fn prior_noise() {
        let s = generate_scene(&SceneSpec { seed: 5, ..Default::default() }, &cam());
        let noise = NoiseSpec { dims_sigma: 0.1, yaw_sigma: 0.1, depth_rel_sigma: 0.1, ..Default::default() };
        let n = apply_noise(&s, &noise, 6);
        for (a, b) in s.objects.iter().zip(&n.objects) {
            assert_eq!(a.kps, b.kps);
            assert_ne!(a.priors, b.priors);
            assert!(b.priors.is_valid());
        }
    }

    #[test]
    fn one_object_one_main_peak() {
        let spec = SceneSpec { n_objects: 1, seed: 8, ..Default::default() };
        let s = generate_scene(&spec, &cam());
        let (maps, _) = encode_headmaps(&s, &EncodeConfig::default()).unwrap();
        assert_eq!((maps.height(), maps.width()), (96, 320));
        assert_eq!(maps.main.data().iter().filter(|v| **v > 0.99).count(), 1);
    }

    #[test]
    fn decode_recovers_scene_keypoints() {
        let cfg = EncodeConfig { vos: VosLayout::PerKeypoint, ..Default::default() };
        for seed in 0..10 {
            let s = generate_scene(&SceneSpec { seed, ..Default::default() }, &cam());
            let (maps, _) = encode_headmaps(&s, &cfg).unwrap();
            let out = decode_headmaps(&maps, &DecodeConfig::default());
            assert_eq!(out.len(), s.objects.len());
            for o in &s.objects {
                let c = Vector2::new(0.5 * (o.bbox[0] + o.bbox[2]), 0.5 * (o.bbox[1] + o.bbox[3]));
                let d = out.iter().find(|d| (d.center - c).norm() < 1e-6).expect("decoded");
                for k in 0..9 {
                    assert_eq!(d.kps.visible[k], o.kps.visible[k]);
                    if o.kps.visible[k] {
                        assert!((d.kps.pts[k] - o.kps.pts[k]).norm() < 0.5);
                    }
                }
            }
        }
    }

    #[test]
    fn sidecar_roundtrip() {
        let s = generate_scene(&SceneSpec { seed: 9, ..Default::default() }, &cam());
        let s = apply_noise(&s, &NoiseSpec { sigma_px: 1.0, dropout: 0.2, ..Default::default() }, 1);
        let kps: Vec<KeypointSet> = s.objects.iter().map(|o| o.kps).collect();
        assert_eq!(parse_keypoints(&write_keypoints(&kps)).unwrap(), kps);
        let mut priors: Vec<Priors> = s.objects.iter().map(|o| o.priors).collect();
        priors[0].yaw = None;
        priors[1].dims = None;
        assert_eq!(parse_priors(&write_priors(&priors)).unwrap(), priors);
        assert!(parse_keypoints("1 2 3").is_err());
        assert!(parse_priors("1 2 - 0.1 10").is_err());
        assert!(parse_priors("1 2 3 0.1 -10").is_err());
    }
}
