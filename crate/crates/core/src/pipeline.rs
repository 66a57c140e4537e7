//! Directory-level drivers behind the command-line tool.
//!
//! A dataset directory uses KITTI-like subdirectories keyed by a six-digit
//! frame id:
//!
//! ```text
//! label_2/000000.txt     ground-truth labels
//! calib/000000.txt       P2 projection
//! keypoints/000000.txt   nine keypoints per object, one object per line
//! priors/000000.txt      h w l yaw depth per object, `-` when absent
//! headmaps/000000.rtmh   head maps, with a 000000.txt plane list beside it
//! ```
//!
//! Solving writes `data/000000.txt` KITTI result files under the output
//! directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::config::RunConfig;
use crate::eval::Frame;
use crate::geometry::{alpha_to_yaw, Box3D, CameraModel, KeypointSet, CENTER};
use crate::heatmap::{decode_headmaps, read_headmaps, sidecar_text, write_headmaps, HeatmapError};
use crate::kitti::{
    box3d_to_label, image_bbox, parse_calib, parse_label_file, to_camera_model, write_calib,
    write_label_file, write_result_file, KittiCalib, KittiError, KittiLabel,
};
use crate::par;
use crate::solver::{solve, Priors, SolveReport};
use crate::synth::{
    apply_noise, encode_headmaps, generate_scenes, parse_keypoints, parse_priors, write_keypoints,
    write_priors, FormatError, Scene, IMAGE_HEIGHT, IMAGE_WIDTH,
};

pub const LABEL_DIR: &str = "label_2";
pub const CALIB_DIR: &str = "calib";
pub const KEYPOINT_DIR: &str = "keypoints";
pub const PRIOR_DIR: &str = "priors";
pub const HEADMAP_DIR: &str = "headmaps";
pub const RESULT_DIR: &str = "data";
pub const HEADMAP_EXT: &str = "rtmh";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Kitti { path: PathBuf, source: KittiError },
    #[error("{}: {source}", path.display())]
    Format { path: PathBuf, source: FormatError },
    #[error("{}: {source}", path.display())]
    Heatmap { path: PathBuf, source: HeatmapError },
    #[error("{}: {msg}", path.display())]
    Inconsistent { path: PathBuf, msg: String },
    #[error("{} does not exist", .0.display())]
    Missing(PathBuf),
    #[error("frame sets differ: no results for [{}], no ground truth for [{}]", missing_results.join(", "), unknown.join(", "))]
    FrameMismatch { missing_results: Vec<String>, unknown: Vec<String> },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl PipelineError {
    /// Errors caused by the inputs rather than by the environment.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, PipelineError::Io { .. })
    }
}

type Result<T> = std::result::Result<T, PipelineError>;

pub fn frame_id(i: usize) -> String {
    format!("{i:06}")
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| match source.kind() {
        std::io::ErrorKind::NotFound => PipelineError::Missing(path.to_path_buf()),
        _ => PipelineError::Io { path: path.to_path_buf(), source },
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })
}

/// Sorted frame ids of the files with extension `ext` in `dir`. Only
/// all-digit file stems count as frames.
pub fn list_frames(dir: &Path, ext: &str) -> Result<Vec<String>> {
    if !dir.is_dir() {
        return Err(PipelineError::Missing(dir.to_path_buf()));
    }
    let entries = fs::read_dir(dir).map_err(|source| PipelineError::Io { path: dir.to_path_buf(), source })?;
    let mut ids = Vec::new();
    for e in entries {
        let p = e.map_err(|source| PipelineError::Io { path: dir.to_path_buf(), source })?.path();
        if p.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = p.file_stem().and_then(|s| s.to_str()).filter(|s| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

pub fn read_labels(path: &Path) -> Result<Vec<KittiLabel>> {
    parse_label_file(&read_text(path)?).map_err(|source| PipelineError::Kitti { path: path.to_path_buf(), source })
}

pub fn read_calib(path: &Path) -> Result<KittiCalib> {
    parse_calib(&read_text(path)?).map_err(|source| PipelineError::Kitti { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthSummary {
    pub frames: usize,
    pub objects: usize,
    pub usable: usize,
}

/// Scenes with their noisy observations, deterministic in `cfg.seed`.
pub fn synth_scenes(cfg: &RunConfig, cam: &CameraModel) -> Vec<(Scene, Scene)> {
    let spec = crate::synth::SceneSpec { seed: cfg.seed, ..cfg.scene };
    let scenes = generate_scenes(&spec, cam, cfg.frames);
    let noise_base = cfg.seed ^ 0x9e37_79b9_7f4a_7c15;
    scenes
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let noisy = apply_noise(&s, &cfg.noise, noise_base.wrapping_add(i as u64));
            (s, noisy)
        })
        .collect()
}

/// Writes `cfg.frames` synthetic frames under `out`.
pub fn run_synth(cfg: &RunConfig, out: &Path) -> Result<SynthSummary> {
    cfg.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
    let cam = CameraModel::kitti_p2();
    let mut dirs = vec![LABEL_DIR, CALIB_DIR, KEYPOINT_DIR, PRIOR_DIR];
    if cfg.write_headmaps {
        dirs.push(HEADMAP_DIR);
    }
    for d in &dirs {
        create_dir(&out.join(d))?;
    }
    let scenes = synth_scenes(cfg, &cam);
    let calib = write_calib(&KittiCalib::from_camera(&cam));
    let enc = cfg.encode_config();
    let written = par::map_range(scenes.len(), |i| -> Result<()> {
        let (clean, noisy) = &scenes[i];
        let id = frame_id(i);
        let file = |d: &str, ext: &str| out.join(d).join(format!("{id}.{ext}"));
        let labels: Vec<KittiLabel> = clean.objects.iter().map(|o| o.label()).collect();
        write_file(&file(LABEL_DIR, "txt"), write_label_file(&labels).as_bytes())?;
        write_file(&file(CALIB_DIR, "txt"), calib.as_bytes())?;
        let kps: Vec<KeypointSet> = noisy.objects.iter().map(|o| o.kps).collect();
        write_file(&file(KEYPOINT_DIR, "txt"), write_keypoints(&kps).as_bytes())?;
        let priors: Vec<Priors> = noisy.objects.iter().map(|o| o.priors).collect();
        write_file(&file(PRIOR_DIR, "txt"), write_priors(&priors).as_bytes())?;
        if cfg.write_headmaps {
            let path = file(HEADMAP_DIR, HEADMAP_EXT);
            let (maps, _) = encode_headmaps(noisy, &enc)
                .map_err(|source| PipelineError::Heatmap { path: path.clone(), source })?;
            let mut bytes = Vec::new();
            write_headmaps(&maps, &mut bytes).map_err(|source| PipelineError::Io { path: path.clone(), source })?;
            write_file(&path, &bytes)?;
            write_file(&file(HEADMAP_DIR, "txt"), sidecar_text(&maps).as_bytes())?;
        }
        Ok(())
    });
    written.into_iter().collect::<Result<Vec<()>>>()?;
    Ok(SynthSummary {
        frames: scenes.len(),
        objects: scenes.iter().map(|(s, _)| s.objects.len()).sum(),
        usable: scenes.iter().map(|(_, n)| n.objects.iter().filter(|o| o.usable).count()).sum(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputSource {
    /// Keypoint files when present, head maps otherwise.
    #[default]
    Auto,
    Keypoints,
    Headmaps,
}

/// One observation handed to the solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub kps: KeypointSet,
    pub priors: Priors,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub enum ObjectOutcome {
    Solved { report: Box<SolveReport>, time: Duration },
    Skipped { reason: String },
}

#[derive(Debug, Clone)]
pub struct ObjectLog {
    pub frame: String,
    pub index: usize,
    pub outcome: ObjectOutcome,
}

#[derive(Debug)]
pub struct SolveSummary {
    pub frames: usize,
    pub objects: Vec<ObjectLog>,
    /// Frames that could not be read; the rest are still processed.
    pub failures: Vec<PipelineError>,
}

impl SolveSummary {
    pub fn solved(&self) -> usize {
        self.objects.iter().filter(|o| matches!(o.outcome, ObjectOutcome::Solved { .. })).count()
    }

    pub fn skipped(&self) -> usize {
        self.objects.len() - self.solved()
    }

    pub fn median_time(&self) -> Option<Duration> {
        let mut t: Vec<Duration> = self
            .objects
            .iter()
            .filter_map(|o| match o.outcome {
                ObjectOutcome::Solved { time, .. } => Some(time),
                ObjectOutcome::Skipped { .. } => None,
            })
            .collect();
        if t.is_empty() {
            return None;
        }
        t.sort();
        let n = t.len();
        Some(if n % 2 == 1 { t[n / 2] } else { (t[n / 2 - 1] + t[n / 2]) / 2 })
    }
}

fn mask_priors(p: Priors, cfg: &RunConfig) -> Priors {
    Priors {
        dims: p.dims.filter(|_| cfg.use_dims_prior),
        yaw: p.yaw.filter(|_| cfg.use_yaw_prior),
        depth: p.depth.filter(|_| cfg.use_depth_prior),
    }
}

fn mean_confidence(kps: &KeypointSet) -> f64 {
    let (sum, n) = (0..kps.conf.len())
        .filter(|&k| kps.visible[k])
        .fold((0.0, 0usize), |(s, n), k| (s + kps.conf[k], n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Observations from keypoint and prior files. A missing prior file means
/// no priors.
pub fn read_keypoint_frame(kp_path: &Path, prior_path: &Path) -> Result<Vec<Observation>> {
    let kps = parse_keypoints(&read_text(kp_path)?)
        .map_err(|source| PipelineError::Format { path: kp_path.to_path_buf(), source })?;
    let priors = match read_text(prior_path) {
        Ok(text) => parse_priors(&text).map_err(|source| PipelineError::Format { path: prior_path.to_path_buf(), source })?,
        Err(PipelineError::Missing(_)) => vec![Priors::default(); kps.len()],
        Err(e) => return Err(e),
    };
    if priors.len() != kps.len() {
        return Err(PipelineError::Inconsistent {
            path: prior_path.to_path_buf(),
            msg: format!("{} prior lines for {} keypoint lines", priors.len(), kps.len()),
        });
    }
    Ok(kps.into_iter().zip(priors).map(|(kps, priors)| Observation { kps, priors, score: mean_confidence(&kps) }).collect())
}

/// Observations decoded from a head-map file. Dimension, orientation and
/// depth regressions become priors.
pub fn read_headmap_frame(path: &Path, cam: &CameraModel, cfg: &RunConfig) -> Result<Vec<Observation>> {
    let sidecar_path = path.with_extension("txt");
    let sidecar = read_text(&sidecar_path)?;
    let file = fs::File::open(path).map_err(|source| match source.kind() {
        std::io::ErrorKind::NotFound => PipelineError::Missing(path.to_path_buf()),
        _ => PipelineError::Io { path: path.to_path_buf(), source },
    })?;
    let maps = read_headmaps(std::io::BufReader::new(file), &sidecar)
        .map_err(|source| PipelineError::Heatmap { path: path.to_path_buf(), source })?;
    Ok(decode_headmaps(&maps, &cfg.decode_config())
        .into_iter()
        .map(|g| {
            let anchor = if g.kps.visible[CENTER] { g.kps.pts[CENTER] } else { g.center };
            let t = cam.back_project(&anchor, g.depth);
            Observation {
                kps: g.kps,
                priors: Priors { dims: Some(g.dims), yaw: Some(alpha_to_yaw(g.alpha, &t)), depth: Some(g.depth) },
                score: g.score,
            }
        })
        .collect())
}

/// Solves every observation of one frame. Returns result labels and a log
/// entry per observation.
pub fn solve_frame(
    frame: &str,
    observations: &[Observation],
    cam: &CameraModel,
    image_size: (f64, f64),
    cfg: &RunConfig,
) -> (Vec<KittiLabel>, Vec<ObjectLog>) {
    let mut labels = Vec::new();
    let mut logs = Vec::new();
    for (index, obs) in observations.iter().enumerate() {
        let priors = mask_priors(obs.priors, cfg);
        let start = Instant::now();
        let res = solve(&obs.kps, cam, &priors, &cfg.weights, &cfg.solver);
        let time = start.elapsed();
        let outcome = match res {
            Ok(report) => match result_label(&report.box3d, cam, image_size, obs.score) {
                Some(l) => {
                    labels.push(l);
                    ObjectOutcome::Solved { report: Box::new(report), time }
                }
                None => ObjectOutcome::Skipped { reason: "solved box is not in view".into() },
            },
            Err(e) => ObjectOutcome::Skipped { reason: e.to_string() },
        };
        logs.push(ObjectLog { frame: frame.to_string(), index, outcome });
    }
    (labels, logs)
}

fn result_label(b: &Box3D, cam: &CameraModel, (w, h): (f64, f64), score: f64) -> Option<KittiLabel> {
    let (bbox, _) = image_bbox(b, cam, w, h)?;
    Some(box3d_to_label(b, "Car", bbox, Some(score)))
}

/// Solves all frames found under `input` and writes result files to
/// `out/data`. Calibration is read from `calib_dir`, `input/calib` by
/// default.
pub fn run_solve(
    cfg: &RunConfig,
    input: &Path,
    calib_dir: Option<&Path>,
    out: &Path,
    source: InputSource,
) -> Result<SolveSummary> {
    cfg.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
    let calib_dir = calib_dir.map(Path::to_path_buf).unwrap_or_else(|| input.join(CALIB_DIR));
    if !calib_dir.is_dir() {
        return Err(PipelineError::Missing(calib_dir));
    }
    let use_kps = match source {
        InputSource::Keypoints => true,
        InputSource::Headmaps => false,
        InputSource::Auto => input.join(KEYPOINT_DIR).is_dir() || !input.join(HEADMAP_DIR).is_dir(),
    };
    let ids = if use_kps {
        list_frames(&input.join(KEYPOINT_DIR), "txt")?
    } else {
        list_frames(&input.join(HEADMAP_DIR), HEADMAP_EXT)?
    };
    let result_dir = out.join(RESULT_DIR);
    create_dir(&result_dir)?;

    let per_frame = par::map(&ids, |id| -> Result<Vec<ObjectLog>> {
        let cam = to_camera_model(&read_calib(&calib_dir.join(format!("{id}.txt")))?);
        let obs = if use_kps {
            read_keypoint_frame(
                &input.join(KEYPOINT_DIR).join(format!("{id}.txt")),
                &input.join(PRIOR_DIR).join(format!("{id}.txt")),
            )?
        } else {
            read_headmap_frame(&input.join(HEADMAP_DIR).join(format!("{id}.{HEADMAP_EXT}")), &cam, cfg)?
        };
        let (labels, logs) = solve_frame(id, &obs, &cam, (IMAGE_WIDTH, IMAGE_HEIGHT), cfg);
        write_file(&result_dir.join(format!("{id}.txt")), write_result_file(&labels).as_bytes())?;
        Ok(logs)
    });

    let mut summary = SolveSummary { frames: ids.len(), objects: Vec::new(), failures: Vec::new() };
    for r in per_frame {
        match r {
            Ok(logs) => summary.objects.extend(logs),
            Err(e) => summary.failures.push(e),
        }
    }
    Ok(summary)
}

fn label_source(dir: &Path, sub: &str) -> PathBuf {
    let nested = dir.join(sub);
    if nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    }
}

/// Pairs result and ground-truth files by frame id. `results` may be the
/// solve output directory or its `data` subdirectory, `gt` a dataset
/// directory or its `label_2` subdirectory.
pub fn load_eval_frames(results: &Path, gt: &Path) -> Result<(Vec<String>, Vec<Frame>)> {
    let res_dir = label_source(results, RESULT_DIR);
    let gt_dir = label_source(gt, LABEL_DIR);
    let res_ids = list_frames(&res_dir, "txt")?;
    let gt_ids = list_frames(&gt_dir, "txt")?;
    let missing_results: Vec<String> = gt_ids.iter().filter(|i| res_ids.binary_search(i).is_err()).cloned().collect();
    let unknown: Vec<String> = res_ids.iter().filter(|i| gt_ids.binary_search(i).is_err()).cloned().collect();
    if !missing_results.is_empty() || !unknown.is_empty() {
        return Err(PipelineError::FrameMismatch { missing_results, unknown });
    }
    let frames = par::map(&gt_ids, |id| -> Result<Frame> {
        Ok(Frame {
            gt: read_labels(&gt_dir.join(format!("{id}.txt")))?,
            det: read_labels(&res_dir.join(format!("{id}.txt")))?,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok((gt_ids, frames))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("rtm3d-pipeline-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&d);
        fs::create_dir_all(&d).unwrap();
        d
    }

    fn small_config() -> RunConfig {
        let mut c = RunConfig { frames: 3, seed: 5, ..RunConfig::default() };
        c.scene.n_objects = 4;
        c.scene.depth_range = (8.0, 30.0);
        c
    }

    #[test]
    fn synth_solve_eval_roundtrip() {
        let dir = tmp("roundtrip");
        let cfg = small_config();
        let s = run_synth(&cfg, &dir).unwrap();
        assert_eq!(s.frames, 3);
        assert!(s.objects > 0);
        let out = dir.join("out");
        let summary = run_solve(&cfg, &dir, None, &out, InputSource::Keypoints).unwrap();
        assert!(summary.failures.is_empty());
        assert_eq!(summary.solved(), s.usable);
        assert!(summary.median_time().is_some());
        let (ids, frames) = load_eval_frames(&out, &dir).unwrap();
        assert_eq!(ids, vec!["000000", "000001", "000002"]);
        for f in &frames {
            for (g, d) in f.gt.iter().zip(&f.det) {
                for i in 0..3 {
                    assert!((g.location[i] - d.location[i]).abs() < 1e-4);
                    assert!((g.dims[i] - d.dims[i]).abs() < 1e-4);
                }
                assert!((g.rotation_y - d.rotation_y).abs() < 1e-4);
            }
        }
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn headmap_input_recovers_boxes() {
        let dir = tmp("headmaps");
        let cfg = small_config();
        run_synth(&cfg, &dir).unwrap();
        let out = dir.join("out");
        let summary = run_solve(&cfg, &dir, None, &out, InputSource::Headmaps).unwrap();
        assert!(summary.failures.is_empty());
        assert!(summary.solved() > 0);
        let (_, frames) = load_eval_frames(&out, &dir).unwrap();
        let report = crate::eval::evaluate(&frames, &[0.7], &[crate::eval::Difficulty::Moderate], Default::default());
        assert!(report.rows[0].ap_bev > 0.9, "{}", report.text());
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn missing_calib_is_reported() {
        let dir = tmp("nocalib");
        let cfg = small_config();
        run_synth(&cfg, &dir).unwrap();
        fs::remove_file(dir.join(CALIB_DIR).join("000001.txt")).unwrap();
        let summary = run_solve(&cfg, &dir, None, &dir.join("out"), InputSource::Keypoints).unwrap();
        assert_eq!(summary.failures.len(), 1);
        assert!(matches!(summary.failures[0], PipelineError::Missing(_)));
        fs::remove_dir_all(dir.join(CALIB_DIR)).unwrap();
        assert!(matches!(
            run_solve(&cfg, &dir, None, &dir.join("out"), InputSource::Keypoints),
            Err(PipelineError::Missing(_))
        ));
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn frame_mismatch_lists_ids() {
        let dir = tmp("mismatch");
        let cfg = small_config();
        run_synth(&cfg, &dir).unwrap();
        let out = dir.join("out");
        run_solve(&cfg, &dir, None, &out, InputSource::Keypoints).unwrap();
        fs::remove_file(out.join(RESULT_DIR).join("000002.txt")).unwrap();
        match load_eval_frames(&out, &dir) {
            Err(PipelineError::FrameMismatch { missing_results, unknown }) => {
                assert_eq!(missing_results, vec!["000002"]);
                assert!(unknown.is_empty());
            }
            other => panic!("{other:?}"),
        }
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn no_priors_skips_sparse_objects() {
        let mut kps = KeypointSet::new([nalgebra::Vector2::new(100.0, 100.0); 9]);
        for k in 3..9 {
            kps.visible[k] = false;
            kps.conf[k] = 0.0;
        }
        let obs = [Observation { kps, priors: Priors::default(), score: 1.0 }];
        let (labels, logs) = solve_frame("000000", &obs, &CameraModel::kitti_p2(), (1280.0, 384.0), &RunConfig::default());
        assert!(labels.is_empty());
        assert!(matches!(&logs[0].outcome, ObjectOutcome::Skipped { reason } if reason.contains("visible")));
    }
}
