//! Forward evaluation of the training losses.

use super::encode::Masks;
use super::{HeadMaps, HeatmapError, Tensor};

const EPS: f64 = 1e-12;

fn check(a: &Tensor, b: &Tensor) -> Result<(), HeatmapError> {
    if a.shape() != b.shape() {
        return Err(HeatmapError::ShapeMismatch { expected: b.shape(), found: a.shape() });
    }
    Ok(())
}

/// Penalty-reduced focal loss over all channels, normalized by the number
/// of cells whose target is exactly one.
pub fn focal_loss(pred: &Tensor, target: &Tensor, alpha: f64, beta: f64) -> Result<f64, HeatmapError> {
    check(pred, target)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, t) in pred.data().iter().zip(target.data()) {
        let p = p.clamp(EPS, 1.0 - EPS);
        if *t == 1.0 {
            n += 1;
            sum += (1.0 - p).powf(alpha) * p.ln();
        } else {
            sum += (1.0 - t).powf(beta) * p.powf(alpha) * (1.0 - p).ln();
        }
    }
    Ok(-sum / n.max(1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RegressionLosses {
    pub dim: f64,
    pub depth: f64,
    pub off_main: f64,
    pub off_vertex: f64,
    pub vertex_coord: f64,
    pub ori: f64,
}

fn masked_sum(
    pred: &Tensor,
    target: &Tensor,
    mask: &[f64],
    channels: std::ops::Range<usize>,
    f: impl Fn(f64) -> f64,
) -> f64 {
    let mut sum = 0.0;
    for c in channels {
        for ((p, t), m) in pred.channel(c).iter().zip(target.channel(c)).zip(mask) {
            if *m != 0.0 {
                sum += m * f(p - t);
            }
        }
    }
    sum
}

/// Multi-Bin loss: per-bin cross entropy on the `(out, in)` scores plus an L1
/// residual on `(sin, cos)` for the bins whose target carries one.
pub fn orientation_loss(pred: &Tensor, target: &Tensor, obj: &Tensor) -> Result<f64, HeatmapError> {
    check(pred, target)?;
    let (h, w) = (obj.height(), obj.width());
    if pred.shape() != (8, h, w) {
        return Err(HeatmapError::ShapeMismatch { expected: (8, h, w), found: pred.shape() });
    }
    let mut sum = 0.0;
    let mut n = 0.0;
    for y in 0..h {
        for x in 0..w {
            let m = obj.get(0, y, x);
            if m == 0.0 {
                continue;
            }
            n += m;
            for b in 0..2 {
                let o = 4 * b;
                let (lo, li) = (pred.get(o, y, x), pred.get(o + 1, y, x));
                let top = lo.max(li);
                let lse = top + ((lo - top).exp() + (li - top).exp()).ln();
                let t_in = target.get(o + 1, y, x);
                sum += m * -(t_in * (li - lse) + (1.0 - t_in) * (lo - lse));
                let (ts, tc) = (target.get(o + 2, y, x), target.get(o + 3, y, x));
                if ts * ts + tc * tc > 0.5 {
                    sum += m
                        * ((pred.get(o + 2, y, x) - ts).abs() + (pred.get(o + 3, y, x) - tc).abs());
                }
            }
        }
    }
    Ok(sum / f64::max(n, 1.0))
}

/// Masked regression losses. Dimension and depth use squared error on the
/// encoded values (the depth plane holds log depth), offsets and keypoint
/// coordinates use L1.
pub fn regression_losses(
    pred: &HeadMaps,
    target: &HeadMaps,
    masks: &Masks,
) -> Result<RegressionLosses, HeatmapError> {
    for ((_, p), (_, t)) in pred.planes().iter().zip(target.planes().iter()) {
        check(p, t)?;
    }
    let (h, w) = (target.height(), target.width());
    check(&masks.obj, &Tensor::zeros(1, h, w))?;
    check(&masks.ver, &Tensor::zeros(target.vos.channels() / 2, h, w))?;

    let obj = masks.obj.channel(0);
    let n = obj.iter().sum::<f64>().max(1.0);
    let nv = masks.ver.data().iter().sum::<f64>().max(1.0);
    let sq = |d: f64| d * d;

    let mut off_v = 0.0;
    for pair in 0..masks.ver.channels() {
        off_v += masked_sum(&pred.vos, &target.vos, masks.ver.channel(pair), 2 * pair..2 * pair + 2, f64::abs);
    }
    Ok(RegressionLosses {
        dim: masked_sum(&pred.dim, &target.dim, obj, 0..3, sq) / (3.0 * n),
        depth: masked_sum(&pred.depth, &target.depth, obj, 0..1, sq) / n,
        off_main: masked_sum(&pred.mos, &target.mos, obj, 0..2, f64::abs) / (2.0 * n),
        off_vertex: off_v / (2.0 * nv),
        vertex_coord: masked_sum(&pred.vc, &target.vc, obj, 0..18, f64::abs) / n,
        ori: orientation_loss(&pred.ori, &target.ori, &masks.obj)?,
    })
}

/// Individual terms of the multi-task loss.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms {
    pub main: f64,
    pub kpver: f64,
    pub ver: f64,
    pub dim: f64,
    pub ori: f64,
    pub dis: f64,
    pub off_main: f64,
    pub off_vertex: f64,
}

impl LossTerms {
    pub fn from_parts(main: f64, kpver: f64, r: &RegressionLosses) -> Self {
        Self {
            main,
            kpver,
            ver: r.vertex_coord,
            dim: r.dim,
            ori: r.ori,
            dis: r.depth,
            off_main: r.off_main,
            off_vertex: r.off_vertex,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub main: f64,
    pub kpver: f64,
    pub ver: f64,
    pub dim: f64,
    pub ori: f64,
    pub dis: f64,
    pub off_main: f64,
    pub off_vertex: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { main: 1.0, kpver: 1.0, ver: 1.0, dim: 1.0, ori: 0.5, dis: 0.1, off_main: 0.5, off_vertex: 0.5 }
    }
}

pub fn multitask_loss(t: &LossTerms, w: &LossWeights) -> f64 {
    w.main * t.main
        + w.kpver * t.kpver
        + w.ver * t.ver
        + w.dim * t.dim
        + w.ori * t.ori
        + w.dis * t.dis
        + w.off_main * t.off_main
        + w.off_vertex * t.off_vertex
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heatmap::VosLayout;
    use proptest::prelude::*;

    #[test]
    fn single_positive_cell() {
        let p = Tensor::from_vec(1, 1, 1, vec![0.5]).unwrap();
        let t = Tensor::from_vec(1, 1, 1, vec![1.0]).unwrap();
        let l = focal_loss(&p, &t, 2.0, 4.0).unwrap();
        assert!((l - 0.25 * 2f64.ln()).abs() < 1e-15);
        assert!((l - 0.1733).abs() < 1e-4);
    }

    #[test]
    fn perfect_prediction_is_nearly_free() {
        let mut t = Tensor::zeros(2, 6, 6);
        t.set(1, 2, 3, 1.0);
        assert!(focal_loss(&t, &t, 2.0, 4.0).unwrap() < 1e-20);
    }

    #[test]
    fn log_depth_error() {
        let mut pred = HeadMaps::zeros(1, 4, 4, VosLayout::Shared);
        let mut target = pred.clone();
        let mut obj = Tensor::zeros(1, 4, 4);
        obj.set(0, 1, 2, 1.0);
        pred.depth.set(0, 1, 2, 10f64.ln());
        target.depth.set(0, 1, 2, 20f64.ln());
        let masks = Masks { obj, ver: Tensor::zeros(1, 4, 4) };
        let r = regression_losses(&pred, &target, &masks).unwrap();
        assert!((r.depth - 0.4805).abs() < 1e-4);
        assert_eq!(r.dim, 0.0);
        assert_eq!(r.off_main, 0.0);
    }

    #[test]
    fn weights() {
        let w = LossWeights::default();
        assert_eq!(multitask_loss(&LossTerms::default(), &w), 0.0);
        let t = LossTerms { dis: 1.0, ..Default::default() };
        assert_eq!(multitask_loss(&t, &w), 0.1);
        let t = LossTerms { main: 1.0, kpver: 2.0, ver: 3.0, dim: 4.0, ori: 5.0, dis: 6.0, off_main: 7.0, off_vertex: 8.0 };
        assert!((multitask_loss(&t, &w) - (1.0 + 2.0 + 3.0 + 4.0 + 2.5 + 0.6 + 3.5 + 4.0)).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        let a = Tensor::zeros(1, 2, 2);
        let b = Tensor::zeros(2, 2, 2);
        assert!(focal_loss(&a, &b, 2.0, 4.0).is_err());
    }

    proptest! {
        #[test]
        fn focal_is_nonnegative(p in prop::collection::vec(0.0..=1.0f64, 16), t in prop::collection::vec(prop_oneof![Just(1.0), 0.0..1.0f64], 16)) {
            let p = Tensor::from_vec(1, 4, 4, p).unwrap();
            let t = Tensor::from_vec(1, 4, 4, t).unwrap();
            prop_assert!(focal_loss(&p, &t, 2.0, 4.0).unwrap() >= 0.0);
        }
    }
}
