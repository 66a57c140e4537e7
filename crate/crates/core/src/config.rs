//! Run configuration in a line-based `key = value` format.
//!
//! `#` starts a comment. Unknown keys and malformed values are errors.
//! [`RunConfig::to_text`] writes every key with its current value, which is
//! also the reference list of keys.

use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

use crate::eval::{Difficulty, Interpolation};
use crate::heatmap::{
    DecodeConfig, DimEncoding, EncodeConfig, GaussianSpec, KernelForm, VosLayout, STRIDE,
};
use crate::solver::{EnergyWeights, SolverConfig};
use crate::synth::{NoiseSpec, SceneSpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key {key:?}")]
    UnknownKey { key: String },
    #[error("bad value {value:?} for {key}")]
    BadValue { key: String, value: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,

    pub solver: SolverConfig,
    pub weights: EnergyWeights,
    pub use_dims_prior: bool,
    pub use_yaw_prior: bool,
    pub use_depth_prior: bool,

    pub main_threshold: f64,
    pub kp_threshold: f64,
    pub topk: usize,
    pub gaussian: GaussianSpec,
    pub dim_encoding: DimEncoding,
    pub vos_layout: VosLayout,

    pub iou: Vec<f64>,
    pub difficulties: Vec<Difficulty>,
    pub interpolation: Interpolation,

    pub frames: usize,
    pub scene: SceneSpec,
    pub noise: NoiseSpec,
    pub write_headmaps: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input_dir: None,
            output_dir: None,
            seed: 0,
            solver: SolverConfig::default(),
            weights: EnergyWeights::default(),
            use_dims_prior: true,
            use_yaw_prior: true,
            use_depth_prior: true,
            main_threshold: 0.4,
            kp_threshold: 0.1,
            topk: 100,
            gaussian: GaussianSpec::default(),
            dim_encoding: DimEncoding::default(),
            vos_layout: VosLayout::PerKeypoint,
            iou: vec![0.5, 0.7],
            difficulties: Difficulty::ALL.to_vec(),
            interpolation: Interpolation::Eleven,
            frames: 10,
            scene: SceneSpec::default(),
            noise: NoiseSpec::default(),
            write_headmaps: true,
        }
    }
}

fn bad(key: &str, value: &str) -> ConfigError {
    ConfigError::BadValue { key: key.to_string(), value: value.to_string() }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| bad(key, value))
}

fn finite(key: &str, value: &str) -> Result<f64, ConfigError> {
    num::<f64>(key, value).and_then(|v| if v.is_finite() { Ok(v) } else { Err(bad(key, value)) })
}

fn flag(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, value)),
    }
}

fn pair(key: &str, value: &str) -> Result<(f64, f64), ConfigError> {
    let (a, b) = value.split_once(',').ok_or_else(|| bad(key, value))?;
    Ok((finite(key, a.trim())?, finite(key, b.trim())?))
}

fn triple(key: &str, value: &str) -> Result<[f64; 3], ConfigError> {
    let v: Vec<f64> = value.split(',').map(|s| finite(key, s.trim())).collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| bad(key, value))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            c.set(k.trim(), v.trim())?;
        }
        Ok(c)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value;
        match key {
            "input_dir" => self.input_dir = Some(PathBuf::from(v)),
            "output_dir" => self.output_dir = Some(PathBuf::from(v)),
            "seed" => self.seed = num(key, v)?,

            "solver.max_iter" => self.solver.max_iter = num(key, v)?,
            "solver.initial_damping" => self.solver.initial_damping = finite(key, v)?,
            "solver.damping_factor" => self.solver.damping_factor = finite(key, v)?,
            "solver.g_tol" => self.solver.g_tol = finite(key, v)?,
            "solver.step_tol" => self.solver.step_tol = finite(key, v)?,
            "solver.max_depth" => self.solver.max_depth = finite(key, v)?,
            "weights.dimension" => self.weights.w_d = finite(key, v)?,
            "weights.rotation" => self.weights.w_r = finite(key, v)?,
            "priors.dimension" => self.use_dims_prior = flag(key, v)?,
            "priors.yaw" => self.use_yaw_prior = flag(key, v)?,
            "priors.depth" => self.use_depth_prior = flag(key, v)?,

            "decode.main_threshold" => self.main_threshold = finite(key, v)?,
            "decode.keypoint_threshold" => self.kp_threshold = finite(key, v)?,
            "decode.topk" => self.topk = num(key, v)?,
            "gaussian.sigma_min" => self.gaussian.sigma_min = finite(key, v)?,
            "gaussian.sigma_max" => self.gaussian.sigma_max = finite(key, v)?,
            "gaussian.area_min" => self.gaussian.a_min = finite(key, v)?,
            "gaussian.area_max" => self.gaussian.a_max = finite(key, v)?,
            "gaussian.kernel" => {
                self.gaussian.kernel = match v {
                    "linear" => KernelForm::Linear,
                    "squared" => KernelForm::Squared,
                    _ => return Err(bad(key, v)),
                }
            }
            "dim_encoding" => {
                self.dim_encoding = match v {
                    "log_ratio" => DimEncoding::log_ratio(),
                    "log_standardized" => DimEncoding::log_standardized(),
                    _ => return Err(bad(key, v)),
                }
            }
            "vos_layout" => {
                self.vos_layout = match v {
                    "shared" => VosLayout::Shared,
                    "per_keypoint" => VosLayout::PerKeypoint,
                    _ => return Err(bad(key, v)),
                }
            }

            "eval.iou" => {
                let ious: Vec<f64> = v.split(',').map(|s| finite(key, s.trim())).collect::<Result<_, _>>()?;
                if ious.is_empty() || ious.iter().any(|t| !(0.0..=1.0).contains(t)) {
                    return Err(bad(key, v));
                }
                self.iou = ious;
            }
            "eval.difficulty" => {
                self.difficulties = if v == "all" {
                    Difficulty::ALL.to_vec()
                } else {
                    v.split(',').map(|s| Difficulty::parse(s.trim()).ok_or_else(|| bad(key, v))).collect::<Result<_, _>>()?
                }
            }
            "eval.interpolation" => {
                self.interpolation = match v {
                    "11" => Interpolation::Eleven,
                    "40" => Interpolation::Forty,
                    _ => return Err(bad(key, v)),
                }
            }

            "synth.frames" => self.frames = num(key, v)?,
            "synth.objects" => self.scene.n_objects = num(key, v)?,
            "synth.depth_range" => self.scene.depth_range = pair(key, v)?,
            "synth.lateral_range" => self.scene.lateral_range = pair(key, v)?,
            "synth.ground_range" => self.scene.ground_range = pair(key, v)?,
            "synth.yaw_range" => self.scene.yaw_range = pair(key, v)?,
            "synth.dims_mean" => self.scene.dims_mean = triple(key, v)?,
            "synth.dims_std" => self.scene.dims_std = triple(key, v)?,
            "synth.separable" => self.scene.separable = flag(key, v)?,
            "synth.headmaps" => self.write_headmaps = flag(key, v)?,
            "noise.pixel_sigma" => self.noise.sigma_px = finite(key, v)?,
            "noise.dropout" => self.noise.dropout = finite(key, v)?,
            "noise.dims_sigma" => self.noise.dims_sigma = finite(key, v)?,
            "noise.yaw_sigma" => self.noise.yaw_sigma = finite(key, v)?,
            "noise.depth_rel_sigma" => self.noise.depth_rel_sigma = finite(key, v)?,
            "noise.conf_floor" => self.noise.conf_floor = finite(key, v)?,
            _ => return Err(ConfigError::UnknownKey { key: key.to_string() }),
        }
        Ok(())
    }

    /// Checks cross-field invariants after parsing and overrides.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, key: &str, v: String| if ok { Ok(()) } else { Err(bad(key, &v)) };
        check(self.scene.is_valid(), "synth", format!("{:?}", self.scene))?;
        check(self.noise.is_valid(), "noise", format!("{:?}", self.noise))?;
        check(self.gaussian.is_valid(), "gaussian", format!("{:?}", self.gaussian))?;
        check((0.0..=1.0).contains(&self.main_threshold), "decode.main_threshold", self.main_threshold.to_string())?;
        check((0.0..=1.0).contains(&self.kp_threshold), "decode.keypoint_threshold", self.kp_threshold.to_string())?;
        check(self.weights.w_d >= 0.0 && self.weights.w_r >= 0.0, "weights", format!("{:?}", self.weights))?;
        check(self.solver.max_depth > 0.0, "solver.max_depth", self.solver.max_depth.to_string())?;
        Ok(())
    }

    pub fn encode_config(&self) -> EncodeConfig {
        EncodeConfig {
            classes: 1,
            stride: STRIDE,
            gaussian: self.gaussian,
            dims: self.dim_encoding,
            vos: self.vos_layout,
        }
    }

    pub fn decode_config(&self) -> DecodeConfig {
        DecodeConfig {
            main_threshold: self.main_threshold,
            kp_threshold: self.kp_threshold,
            topk: self.topk,
            gaussian: self.gaussian,
            dims: self.dim_encoding,
            ..DecodeConfig::default()
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        if let Some(p) = &self.input_dir {
            kv("input_dir", p.display().to_string());
        }
        if let Some(p) = &self.output_dir {
            kv("output_dir", p.display().to_string());
        }
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        kv("seed", self.seed.to_string());
        kv("solver.max_iter", self.solver.max_iter.to_string());
        kv("solver.initial_damping", self.solver.initial_damping.to_string());
        kv("solver.damping_factor", self.solver.damping_factor.to_string());
        kv("solver.g_tol", self.solver.g_tol.to_string());
        kv("solver.step_tol", self.solver.step_tol.to_string());
        kv("solver.max_depth", self.solver.max_depth.to_string());
        kv("weights.dimension", self.weights.w_d.to_string());
        kv("weights.rotation", self.weights.w_r.to_string());
        kv("priors.dimension", self.use_dims_prior.to_string());
        kv("priors.yaw", self.use_yaw_prior.to_string());
        kv("priors.depth", self.use_depth_prior.to_string());
        kv("decode.main_threshold", self.main_threshold.to_string());
        kv("decode.keypoint_threshold", self.kp_threshold.to_string());
        kv("decode.topk", self.topk.to_string());
        kv("gaussian.sigma_min", self.gaussian.sigma_min.to_string());
        kv("gaussian.sigma_max", self.gaussian.sigma_max.to_string());
        kv("gaussian.area_min", self.gaussian.a_min.to_string());
        kv("gaussian.area_max", self.gaussian.a_max.to_string());
        kv(
            "gaussian.kernel",
            match self.gaussian.kernel {
                KernelForm::Linear => "linear",
                KernelForm::Squared => "squared",
            }
            .into(),
        );
        kv(
            "dim_encoding",
            match self.dim_encoding {
                DimEncoding::LogRatio { .. } => "log_ratio",
                DimEncoding::LogStandardized { .. } => "log_standardized",
            }
            .into(),
        );
        kv(
            "vos_layout",
            match self.vos_layout {
                VosLayout::Shared => "shared",
                VosLayout::PerKeypoint => "per_keypoint",
            }
            .into(),
        );
        kv("eval.iou", join(&self.iou));
        kv("eval.difficulty", self.difficulties.iter().map(|d| d.name()).collect::<Vec<_>>().join(","));
        kv(
            "eval.interpolation",
            match self.interpolation {
                Interpolation::Eleven => "11",
                Interpolation::Forty => "40",
            }
            .into(),
        );
        kv("synth.frames", self.frames.to_string());
        kv("synth.objects", self.scene.n_objects.to_string());
        let p = |(a, b): (f64, f64)| format!("{a},{b}");
        kv("synth.depth_range", p(self.scene.depth_range));
        kv("synth.lateral_range", p(self.scene.lateral_range));
        kv("synth.ground_range", p(self.scene.ground_range));
        kv("synth.yaw_range", p(self.scene.yaw_range));
        kv("synth.dims_mean", join(&self.scene.dims_mean));
        kv("synth.dims_std", join(&self.scene.dims_std));
        kv("synth.separable", self.scene.separable.to_string());
        kv("synth.headmaps", self.write_headmaps.to_string());
        kv("noise.pixel_sigma", self.noise.sigma_px.to_string());
        kv("noise.dropout", self.noise.dropout.to_string());
        kv("noise.dims_sigma", self.noise.dims_sigma.to_string());
        kv("noise.yaw_sigma", self.noise.yaw_sigma.to_string());
        kv("noise.depth_rel_sigma", self.noise.depth_rel_sigma.to_string());
        kv("noise.conf_floor", self.noise.conf_floor.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_method() {
        let c = RunConfig::default();
        assert_eq!(c.main_threshold, 0.4);
        assert_eq!(c.kp_threshold, 0.1);
        assert_eq!((c.weights.w_d, c.weights.w_r), (1.0, 1.0));
        assert_eq!((c.gaussian.sigma_min, c.gaussian.sigma_max), (3.0, 19.0));
        c.validate().unwrap();
    }

    #[test]
    fn text_roundtrip() {
        let mut c = RunConfig {
            seed: 99,
            iou: vec![0.5],
            vos_layout: VosLayout::Shared,
            output_dir: Some("out/dir".into()),
            ..RunConfig::default()
        };
        c.scene.depth_range = (4.0, 31.5);
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn comments_and_errors() {
        let c = RunConfig::parse("# run\n\nseed = 7  # trailing\nweights.rotation=0\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.weights.w_r, 0.0);
        assert_eq!(RunConfig::parse("seed 7"), Err(ConfigError::Syntax { line: 1 }));
        assert!(matches!(RunConfig::parse("sed = 7"), Err(ConfigError::UnknownKey { .. })));
        assert!(matches!(RunConfig::parse("seed = -1"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(RunConfig::parse("eval.iou = 1.5"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(RunConfig::parse("noise.dropout = nan"), Err(ConfigError::BadValue { .. })));
        let c = RunConfig::parse("noise.dropout = 1").unwrap();
        assert!(c.validate().is_err());
    }
}
