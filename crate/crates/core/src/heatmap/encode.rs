use nalgebra::{Vector2, Vector3};

use super::gaussian::{adaptive_sigma, render_gaussian, GaussianSpec};
use super::multibin::multibin_encode;
use super::{HeadMaps, HeatmapError, Tensor, VosLayout, STRIDE};
use crate::geometry::{KeypointSet, NUM_KEYPOINTS};
use crate::solver::{MEAN_CAR_DIMS, STD_CAR_DIMS};

/// How `[h, w, l]` is stored in the dimension plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DimEncoding {
    /// `log((D - mean) / std)`. Undefined for dimensions at or below the mean.
    LogStandardized { mean: [f64; 3], std: [f64; 3] },
    /// `log(D / mean)`.
    LogRatio { mean: [f64; 3] },
}

impl DimEncoding {
    pub fn log_standardized() -> Self {
        DimEncoding::LogStandardized { mean: MEAN_CAR_DIMS, std: STD_CAR_DIMS }
    }

    pub fn log_ratio() -> Self {
        DimEncoding::LogRatio { mean: MEAN_CAR_DIMS }
    }
}

impl Default for DimEncoding {
    fn default() -> Self {
        Self::log_ratio()
    }
}

pub fn encode_dims(dims: &Vector3<f64>, enc: &DimEncoding) -> Result<Vector3<f64>, HeatmapError> {
    let mut out = Vector3::zeros();
    for axis in 0..3 {
        let r = match enc {
            DimEncoding::LogStandardized { mean, std } => (dims[axis] - mean[axis]) / std[axis],
            DimEncoding::LogRatio { mean } => dims[axis] / mean[axis],
        };
        // Written so that NaN also fails.
        if !(r > 0.0) {
            return Err(HeatmapError::NonPositiveDimensionStandardization { axis, value: r });
        }
        out[axis] = r.ln();
    }
    Ok(out)
}

pub fn decode_dims(code: &Vector3<f64>, enc: &DimEncoding) -> Vector3<f64> {
    match enc {
        DimEncoding::LogStandardized { mean, std } => {
            Vector3::from_fn(|i, _| mean[i] + std[i] * code[i].exp())
        }
        DimEncoding::LogRatio { mean } => Vector3::from_fn(|i, _| mean[i] * code[i].exp()),
    }
}

/// Ground truth for one object, in input-image pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectTarget {
    pub class: usize,
    /// Maincenter: center of the 2D box.
    pub center: Vector2<f64>,
    /// Area of the 2D box (px²), drives the Gaussian spread.
    pub area: f64,
    /// Only visible keypoints are drawn into the keypoint heatmap.
    pub kps: KeypointSet,
    pub dims: Vector3<f64>,
    pub alpha: f64,
    pub depth: f64,
}

/// Indicator planes for the regression losses.
#[derive(Debug, Clone, PartialEq)]
pub struct Masks {
    /// 1 at maincenter cells.
    pub obj: Tensor,
    /// 1 at keypoint cells; one channel per offset pair of the vos plane.
    pub ver: Tensor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodeConfig {
    pub classes: usize,
    pub stride: usize,
    pub gaussian: GaussianSpec,
    pub dims: DimEncoding,
    pub vos: VosLayout,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        Self {
            classes: 1,
            stride: STRIDE,
            gaussian: GaussianSpec::default(),
            dims: DimEncoding::default(),
            vos: VosLayout::default(),
        }
    }
}

fn cell_of(p: &Vector2<f64>, height: usize, width: usize) -> Option<(usize, usize)> {
    let (x, y) = (p.x.floor(), p.y.floor());
    (x >= 0.0 && y >= 0.0 && x < width as f64 && y < height as f64).then_some((x as usize, y as usize))
}

/// Renders training targets on a `height×width` grid. Objects are written in
/// order, so where regression cells collide the later object wins; callers
/// usually pass objects far to near.
pub fn encode_objects(
    objects: &[ObjectTarget],
    height: usize,
    width: usize,
    cfg: &EncodeConfig,
) -> Result<(HeadMaps, Masks), HeatmapError> {
    let mut maps = HeadMaps::zeros(cfg.classes, height, width, cfg.vos);
    let mut masks = Masks {
        obj: Tensor::zeros(1, height, width),
        ver: Tensor::zeros(cfg.vos.channels() / 2, height, width),
    };
    let s = cfg.stride as f64;
    for obj in objects {
        let m = obj.center / s;
        let Some((mx, my)) = cell_of(&m, height, width) else { continue };
        let dim_code = encode_dims(&obj.dims, &cfg.dims)?;
        let sigma = adaptive_sigma(obj.area, &cfg.gaussian);
        render_gaussian(&mut maps.main, obj.class, &m, sigma, cfg.gaussian.kernel);

        maps.mos.set(0, my, mx, m.x - mx as f64);
        maps.mos.set(1, my, mx, m.y - my as f64);
        for k in 0..NUM_KEYPOINTS {
            let d = obj.kps.pts[k] / s - m;
            maps.vc.set(2 * k, my, mx, d.x);
            maps.vc.set(2 * k + 1, my, mx, d.y);
        }
        for i in 0..3 {
            maps.dim.set(i, my, mx, dim_code[i]);
        }
        for (i, v) in multibin_encode(obj.alpha).iter().enumerate() {
            maps.ori.set(i, my, mx, *v);
        }
        maps.depth.set(0, my, mx, obj.depth.ln());
        masks.obj.set(0, my, mx, 1.0);

        for k in 0..NUM_KEYPOINTS {
            if !obj.kps.visible[k] {
                continue;
            }
            let v = obj.kps.pts[k] / s;
            let Some((vx, vy)) = cell_of(&v, height, width) else { continue };
            render_gaussian(&mut maps.vertex, k, &v, sigma, cfg.gaussian.kernel);
            let c = cfg.vos.channel_of(k);
            maps.vos.set(c, vy, vx, v.x - vx as f64);
            maps.vos.set(c + 1, vy, vx, v.y - vy as f64);
            masks.ver.set(c / 2, vy, vx, 1.0);
        }
    }
    Ok((maps, masks))
}
