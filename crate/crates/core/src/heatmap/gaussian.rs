use nalgebra::Vector2;

use super::Tensor;

/// Denominator of the Gaussian exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelForm {
    /// `exp(-(x² + y²) / (2σ))`.
    #[default]
    Linear,
    /// `exp(-(x² + y²) / (2σ²))`.
    Squared,
}

impl KernelForm {
    pub fn eval(self, d2: f64, sigma: f64) -> f64 {
        match self {
            KernelForm::Linear => (-d2 / (2.0 * sigma)).exp(),
            KernelForm::Squared => (-d2 / (2.0 * sigma * sigma)).exp(),
        }
    }

    /// Squared distance beyond which the kernel drops below `floor`.
    fn cutoff_d2(self, sigma: f64, floor: f64) -> f64 {
        let k = -2.0 * floor.ln();
        match self {
            KernelForm::Linear => k * sigma,
            KernelForm::Squared => k * sigma * sigma,
        }
    }
}

/// Spread of the keypoint Gaussians as a function of the 2D box area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// Largest 2D box area in the training data (px²).
    pub a_max: f64,
    /// Smallest 2D box area in the training data (px²).
    pub a_min: f64,
    pub kernel: KernelForm,
}

impl Default for GaussianSpec {
    fn default() -> Self {
        Self { sigma_max: 19.0, sigma_min: 3.0, a_max: 160_000.0, a_min: 400.0, kernel: KernelForm::Linear }
    }
}

impl GaussianSpec {
    pub fn is_valid(&self) -> bool {
        self.sigma_max > self.sigma_min
            && self.sigma_min > 0.0
            && self.a_max > self.a_min
            && self.a_min > 0.0
    }
}

/// `σ = A (σmax - σmin) / (Amax - Amin)`, clamped to `[σmin, σmax]`.
pub fn adaptive_sigma(area: f64, spec: &GaussianSpec) -> f64 {
    let s = area * (spec.sigma_max - spec.sigma_min) / (spec.a_max - spec.a_min);
    s.clamp(spec.sigma_min, spec.sigma_max)
}

/// Values below this are not written.
const TAIL: f64 = 1e-6;

/// Draws a Gaussian peaked at the grid cell containing `center` into
/// `channel`, keeping the larger value where it overlaps existing content.
/// Centers outside the grid are ignored.
pub fn render_gaussian(
    map: &mut Tensor,
    channel: usize,
    center: &Vector2<f64>,
    sigma: f64,
    kernel: KernelForm,
) {
    let (cx, cy) = (center.x.floor(), center.y.floor());
    let (h, w) = (map.height() as f64, map.width() as f64);
    if !(cx >= 0.0 && cy >= 0.0 && cx < w && cy < h) {
        return;
    }
    let (cx, cy) = (cx as i64, cy as i64);
    let r = kernel.cutoff_d2(sigma, TAIL).sqrt().ceil() as i64;
    let plane = map.channel_mut(channel);
    let (hi, wi) = (h as i64, w as i64);
    for y in (cy - r).max(0)..=(cy + r).min(hi - 1) {
        for x in (cx - r).max(0)..=(cx + r).min(wi - 1) {
            let (dx, dy) = ((x - cx) as f64, (y - cy) as f64);
            let v = kernel.eval(dx * dx + dy * dy, sigma);
            if v < TAIL {
                continue;
            }
            let cell = &mut plane[(y * wi + x) as usize];
            if v > *cell {
                *cell = v;
            }
        }
    }
}
