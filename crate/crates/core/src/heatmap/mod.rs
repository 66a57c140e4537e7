//! Dense keypoint maps: target encoding, training losses, decoding.
//!
//! All maps live on the output grid, the input image downsampled by the
//! stride `S`. Pixel coordinates are converted with `cell = floor(p / S)` and
//! the sub-cell remainder is carried by the offset planes.

mod decode;
mod encode;
mod gaussian;
mod io;
mod loss;
mod multibin;
mod tensor;

use thiserror::Error;

pub use decode::{
    decode_headmaps, extract_peaks, group_keypoints, DecodeConfig, GroupedObject, Peak,
};
pub use encode::{
    decode_dims, encode_dims, encode_objects, DimEncoding, EncodeConfig, Masks, ObjectTarget,
};
pub use gaussian::{adaptive_sigma, render_gaussian, GaussianSpec, KernelForm};
pub use io::{read_headmaps, sidecar_text, write_headmaps, MAGIC};
pub use loss::{
    focal_loss, multitask_loss, orientation_loss, regression_losses, LossTerms, LossWeights,
    RegressionLosses,
};
pub use multibin::{multibin_decode, multibin_encode, BIN_CENTERS, BIN_MARGIN};
pub use tensor::{kfpn_fuse, resize_bilinear, Tensor};

/// Downsampling factor between the input image and the output grid.
pub const STRIDE: usize = 4;

#[derive(Debug, Error)]
pub enum HeatmapError {
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: (usize, usize, usize), found: (usize, usize, usize) },
    #[error("no input maps")]
    Empty,
    #[error("dimension {axis} standardizes to {value}, which has no logarithm")]
    NonPositiveDimensionStandardization { axis: usize, value: f64 },
    #[error("not a head-map file")]
    BadMagic,
    #[error("malformed plane list: {0}")]
    Sidecar(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Layout of the vertex sub-cell offset plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VosLayout {
    /// Two channels shared by all nine keypoint types.
    #[default]
    Shared,
    /// Two channels per keypoint type.
    PerKeypoint,
}

impl VosLayout {
    pub fn channels(self) -> usize {
        match self {
            VosLayout::Shared => 2,
            VosLayout::PerKeypoint => 18,
        }
    }

    /// First offset channel used by keypoint `k`.
    pub fn channel_of(self, k: usize) -> usize {
        match self {
            VosLayout::Shared => 0,
            VosLayout::PerKeypoint => 2 * k,
        }
    }

    pub fn from_channels(c: usize) -> Option<Self> {
        match c {
            2 => Some(VosLayout::Shared),
            18 => Some(VosLayout::PerKeypoint),
            _ => None,
        }
    }
}

/// The output planes of a detection head.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadMaps {
    /// Maincenter heatmap, one channel per class.
    pub main: Tensor,
    /// Keypoint heatmap: eight vertexes then the projected 3D center.
    pub vertex: Tensor,
    /// Keypoint position relative to the maincenter, in grid cells
    /// (`(du, dv)` for each of the nine keypoints).
    pub vc: Tensor,
    /// Maincenter sub-cell offset.
    pub mos: Tensor,
    /// Keypoint sub-cell offset, see [`VosLayout`].
    pub vos: Tensor,
    /// Encoded `[h, w, l]`, see [`DimEncoding`].
    pub dim: Tensor,
    /// Multi-Bin orientation code.
    pub ori: Tensor,
    /// Log depth.
    pub depth: Tensor,
}

impl HeadMaps {
    pub fn zeros(classes: usize, height: usize, width: usize, vos: VosLayout) -> Self {
        let z = |c| Tensor::zeros(c, height, width);
        Self {
            main: z(classes),
            vertex: z(9),
            vc: z(18),
            mos: z(2),
            vos: z(vos.channels()),
            dim: z(3),
            ori: z(8),
            depth: z(1),
        }
    }

    pub fn height(&self) -> usize {
        self.main.height()
    }

    pub fn width(&self) -> usize {
        self.main.width()
    }

    pub fn vos_layout(&self) -> VosLayout {
        VosLayout::from_channels(self.vos.channels()).unwrap_or_default()
    }

    /// Planes in file order with their names.
    pub fn planes(&self) -> [(&'static str, &Tensor); 8] {
        [
            ("main", &self.main),
            ("vertex", &self.vertex),
            ("vc", &self.vc),
            ("mos", &self.mos),
            ("vos", &self.vos),
            ("dim", &self.dim),
            ("ori", &self.ori),
            ("depth", &self.depth),
        ]
    }

    /// Checks that every plane shares the grid and has a legal channel count.
    pub fn validate(&self) -> Result<(), HeatmapError> {
        let (h, w) = (self.height(), self.width());
        let expected = [None, Some(9), Some(18), Some(2), None, Some(3), Some(8), Some(1)];
        for ((_, t), c) in self.planes().iter().zip(expected) {
            let c = c.unwrap_or(t.channels());
            if t.shape() != (c, h, w) {
                return Err(HeatmapError::ShapeMismatch { expected: (c, h, w), found: t.shape() });
            }
        }
        if VosLayout::from_channels(self.vos.channels()).is_none() {
            return Err(HeatmapError::ShapeMismatch {
                expected: (2, h, w),
                found: self.vos.shape(),
            });
        }
        Ok(())
    }
}
