use super::HeatmapError;

/// Channel-major, row-major `C×H×W` array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width, data: vec![0.0; channels * height * width] }
    }

    pub fn from_vec(
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<f64>,
    ) -> Result<Self, HeatmapError> {
        if data.len() != channels * height * width {
            return Err(HeatmapError::ShapeMismatch {
                expected: (channels, height, width),
                found: (data.len(), 1, 1),
            });
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut t = Self::zeros(channels, height, width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    t.set(c, y, x, f(c, y, x));
                }
            }
        }
        t
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn index(&self, c: usize, y: usize, x: usize) -> usize {
        debug_assert!(c < self.channels && y < self.height && x < self.width);
        (c * self.height + y) * self.width + x
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(c, y, x)]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        let i = self.index(c, y, x);
        self.data[i] = v;
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    fn check_same(&self, other: &Tensor) -> Result<(), HeatmapError> {
        if self.shape() != other.shape() {
            return Err(HeatmapError::ShapeMismatch { expected: self.shape(), found: other.shape() });
        }
        Ok(())
    }
}

/// Bilinear resampling to `height×width` with half-pixel centers and edge
/// clamping.
pub fn resize_bilinear(t: &Tensor, height: usize, width: usize) -> Tensor {
    let sy = t.height as f64 / height as f64;
    let sx = t.width as f64 / width as f64;
    let src = |o: usize, s: f64, n: usize| {
        let p = ((o as f64 + 0.5) * s - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = p.floor() as usize;
        (i0, (i0 + 1).min(n - 1), p - i0 as f64)
    };
    Tensor::from_fn(t.channels, height, width, |c, y, x| {
        let (y0, y1, fy) = src(y, sy, t.height);
        let (x0, x1, fx) = src(x, sx, t.width);
        let top = t.get(c, y0, x0) * (1.0 - fx) + t.get(c, y0, x1) * fx;
        let bottom = t.get(c, y1, x0) * (1.0 - fx) + t.get(c, y1, x1) * fx;
        top * (1.0 - fy) + bottom * fy
    })
}

/// Keypoint feature pyramid fusion: a per-cell softmax over scales weights
/// the scale scores. Scales must already share one shape.
pub fn kfpn_fuse(scales: &[Tensor]) -> Result<Tensor, HeatmapError> {
    let first = scales.first().ok_or(HeatmapError::Empty)?;
    for s in &scales[1..] {
        first.check_same(s)?;
    }
    let mut out = Tensor::zeros(first.channels, first.height, first.width);
    for (i, o) in out.data.iter_mut().enumerate() {
        let m = scales.iter().map(|s| s.data[i]).fold(f64::NEG_INFINITY, f64::max);
        let (mut num, mut den) = (0.0, 0.0);
        for s in scales {
            let v = s.data[i];
            let e = (v - m).exp();
            num += v * e;
            den += e;
        }
        *o = num / den;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn singleton_scale_is_identity() {
        let t = Tensor::from_fn(2, 3, 4, |c, y, x| (c * 12 + y * 4 + x) as f64 * 0.37 - 3.0);
        assert_eq!(kfpn_fuse(std::slice::from_ref(&t)).unwrap(), t);
    }

    #[test]
    fn two_scale_hand_case() {
        let a = Tensor::from_vec(1, 1, 1, vec![2.0]).unwrap();
        let b = Tensor::from_vec(1, 1, 1, vec![0.0]).unwrap();
        let f = kfpn_fuse(&[a, b]).unwrap();
        assert!((f.get(0, 0, 0) - 1.7616).abs() < 1e-4);
    }

    #[test]
    fn shape_mismatch_and_empty() {
        let a = Tensor::zeros(1, 2, 2);
        let b = Tensor::zeros(1, 2, 3);
        assert!(matches!(kfpn_fuse(&[a, b]), Err(HeatmapError::ShapeMismatch { .. })));
        assert!(matches!(kfpn_fuse(&[]), Err(HeatmapError::Empty)));
    }

    #[test]
    fn resize_keeps_constants_and_upsamples_linearly() {
        let c = Tensor::from_fn(1, 3, 5, |_, _, _| 0.25);
        assert!(resize_bilinear(&c, 12, 20).data().iter().all(|v| (v - 0.25).abs() < 1e-15));

        let ramp = Tensor::from_vec(1, 1, 2, vec![0.0, 1.0]).unwrap();
        let up = resize_bilinear(&ramp, 1, 4);
        assert_eq!(up.data(), &[0.0, 0.25, 0.75, 1.0]);
        assert_eq!(resize_bilinear(&ramp, 1, 2), ramp);
    }

    proptest! {
        #[test]
        fn fusion_is_a_convex_combination(vals in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 12), 1..5)) {
            let scales: Vec<Tensor> = vals.iter().map(|v| Tensor::from_vec(1, 3, 4, v.clone()).unwrap()).collect();
            let f = kfpn_fuse(&scales).unwrap();
            for i in 0..12 {
                let lo = vals.iter().map(|v| v[i]).fold(f64::INFINITY, f64::min);
                let hi = vals.iter().map(|v| v[i]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(f.data()[i] >= lo - 1e-12 && f.data()[i] <= hi + 1e-12);
            }
        }
    }
}
