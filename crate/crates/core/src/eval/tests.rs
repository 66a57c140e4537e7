use std::f64::consts::PI;

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::geometry::Box3D;
use crate::kitti::{box3d_to_label, KittiLabel};

fn car(bbox: [f64; 4], alpha: f64, score: Option<f64>) -> KittiLabel {
    let b = Box3D::new(Vector3::new(1.5, 1.6, 3.9), Vector3::new(bbox[0] / 50.0, 1.6, 20.0 + bbox[1]), 0.0);
    KittiLabel { alpha, ..box3d_to_label(&b, "Car", bbox, score) }
}

fn image_params(difficulty: Difficulty) -> EvalParams {
    EvalParams::new(Metric::Image, 0.7, difficulty)
}

/// Separately written greedy matcher for image boxes of cars without
/// DontCare regions: returns (counted detections, true positives, summed
/// similarity, counted ground truth).
fn reference_match(f: &Frame, p: &EvalParams, cut: f64) -> (f64, f64, f64, usize) {
    let ok = |g: &KittiLabel| {
        g.bbox[3] - g.bbox[1] >= p.filter.min_height
            && g.occluded <= p.filter.max_occlusion
            && g.truncated <= p.filter.max_truncation
    };
    let mut dets: Vec<&KittiLabel> = f.det.iter().filter(|d| d.score.unwrap() >= cut).collect();
    dets.sort_by(|a, b| b.score.unwrap().partial_cmp(&a.score.unwrap()).unwrap());
    let mut used = vec![false; f.gt.len()];
    let (mut counted, mut tp, mut sim) = (0.0, 0.0, 0.0);
    for d in dets {
        let mut pick: Option<usize> = None;
        for pass_valid in [true, false] {
            let mut best = -1.0;
            for (j, g) in f.gt.iter().enumerate() {
                let iou = iou_2d(&d.bbox, &g.bbox);
                if !used[j] && ok(g) == pass_valid && iou >= p.iou_threshold && iou > best {
                    best = iou;
                    pick = Some(j);
                }
            }
            if pick.is_some() {
                break;
            }
        }
        match pick {
            Some(j) => {
                used[j] = true;
                if ok(&f.gt[j]) {
                    counted += 1.0;
                    tp += 1.0;
                    sim += (1.0 + (d.alpha - f.gt[j].alpha).cos()) / 2.0;
                }
            }
            None if d.bbox[3] - d.bbox[1] >= p.filter.min_height => counted += 1.0,
            None => {}
        }
    }
    (counted, tp, sim, f.gt.iter().filter(|g| ok(g)).count())
}

/// Brute force over score thresholds: for every cut the surviving
/// detections are re-matched from scratch and precision/recall recomputed.
fn reference_ap(frames: &[Frame], p: &EvalParams, orientation: bool) -> f64 {
    let mut cuts: Vec<f64> = frames.iter().flat_map(|f| f.det.iter().map(|d| d.score.unwrap())).collect();
    cuts.sort_by(|a, b| b.total_cmp(a));
    cuts.dedup();
    let mut pr = Vec::new();
    for &cut in &cuts {
        let (mut counted, mut tp, mut sim, mut n_gt) = (0.0, 0.0, 0.0, 0);
        for f in frames {
            let (c, t, s, n) = reference_match(f, p, cut);
            counted += c;
            tp += t;
            sim += s;
            n_gt += n;
        }
        if counted > 0.0 {
            pr.push((tp / n_gt as f64, if orientation { sim } else { tp } / counted));
        }
    }
    let mut total = 0.0;
    for i in 0..=10 {
        let r = i as f64 / 10.0;
        total += pr.iter().filter(|(rc, _)| *rc >= r - 1e-15).map(|(_, p)| *p).fold(0.0, f64::max);
    }
    total / 11.0
}

fn fixture() -> Frame {
    let a = [100.0, 100.0, 200.0, 180.0];
    let b = [400.0, 120.0, 480.0, 190.0];
    let c = [700.0, 100.0, 760.0, 160.0];
    Frame {
        gt: vec![car(a, 0.2, None), car(b, -1.0, None), car(c, 2.0, None)],
        det: vec![
            car([102.0, 101.0, 201.0, 181.0], 0.2, Some(0.9)),
            car([900.0, 100.0, 960.0, 170.0], 0.0, Some(0.8)),
            car([401.0, 121.0, 479.0, 190.0], -1.0 + PI / 2.0, Some(0.7)),
            car([99.0, 99.0, 199.0, 179.0], 0.2, Some(0.6)),
        ],
    }
}

#[test]
fn hand_fixture_matches_reference() {
    let frames = [fixture()];
    let p = image_params(Difficulty::Moderate);
    let curve = average_precision(&frames, &p);
    assert!((curve.ap - 6.0 / 11.0).abs() < 1e-12);
    assert!((curve.ap - reference_ap(&frames, &p, false)).abs() < 1e-12);
    assert_eq!(curve.precision, vec![1.0, 0.5, 2.0 / 3.0, 0.5]);

    // Second match has orientation similarity 1/2.
    let s = aos(&frames, &p);
    let expected = (4.0 * 1.0 + 3.0 * (1.5 / 3.0)) / 11.0;
    assert!((s - expected).abs() < 1e-12);
    assert!((s - reference_ap(&frames, &p, true)).abs() < 1e-12);
}

#[test]
fn forty_point_variant() {
    let frames = [fixture()];
    let p = EvalParams { interpolation: Interpolation::Forty, ..image_params(Difficulty::Moderate) };
    // 13 recall points up to 1/3 at precision 1, 13 up to 2/3 at 2/3.
    let expected = (13.0 + 13.0 * 2.0 / 3.0) / 40.0;
    assert!((average_precision(&frames, &p).ap - expected).abs() < 1e-12);
}

#[test]
fn perfect_and_empty() {
    let mut f = fixture();
    f.det = f.gt.iter().enumerate().map(|(i, g)| KittiLabel { score: Some(0.1 * i as f64), ..g.clone() }).collect();
    for metric in [Metric::Image, Metric::Bev, Metric::Box3D] {
        let p = EvalParams::new(metric, 0.7, Difficulty::Hard);
        assert_eq!(average_precision(std::slice::from_ref(&f), &p).ap, 1.0);
    }
    assert_eq!(aos(std::slice::from_ref(&f), &image_params(Difficulty::Easy)), 1.0);
    f.det.clear();
    assert_eq!(average_precision(&[f], &image_params(Difficulty::Easy)).ap, 0.0);
}

#[test]
fn opposite_heading_scores_zero_similarity() {
    let mut f = fixture();
    f.gt.truncate(1);
    f.det = vec![KittiLabel { alpha: f.gt[0].alpha + PI, score: Some(1.0), ..f.gt[0].clone() }];
    let p = image_params(Difficulty::Easy);
    assert_eq!(average_precision(std::slice::from_ref(&f), &p).ap, 1.0);
    assert!(aos(&[f], &p).abs() < 1e-15);
}

#[test]
fn dontcare_and_difficulty_are_ignored() {
    let mut f = fixture();
    f.gt.push(KittiLabel { kind: "DontCare".into(), ..car([880.0, 90.0, 980.0, 180.0], 0.0, None) });
    let p = image_params(Difficulty::Moderate);
    let (scored, n) = match_frame(&f, &p);
    assert_eq!(n, 3);
    assert_eq!(scored.len(), 3);

    // Too heavily occluded for easy: neither a miss nor a hit.
    let mut g = fixture();
    g.gt[1].occluded = 1;
    let (scored, n) = match_frame(&g, &image_params(Difficulty::Easy));
    assert_eq!(n, 2);
    assert_eq!(scored.iter().filter(|s| s.tp).count(), 1);
    assert_eq!(scored.len(), 3);
}

#[test]
fn difficulty_sets_are_nested() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..2000 {
        let top = rng.random_range(0.0..300.0);
        let mut l = car([0.0, top, 50.0, top + rng.random_range(0.0..80.0)], 0.0, None);
        l.occluded = rng.random_range(0..4);
        l.truncated = rng.random_range(0.0..1.0);
        let [e, m, h] = Difficulty::ALL.map(|d| d.filter().accepts(&l));
        assert!(!e || m);
        assert!(!m || h);
    }
}

fn noisy_frames(rng: &mut ChaCha8Rng) -> Vec<Frame> {
    (0..5)
        .map(|_| {
            let gt: Vec<KittiLabel> = (0..4)
                .map(|i| {
                    let x = 60.0 + 300.0 * i as f64 + rng.random_range(0.0..50.0);
                    let mut l = car([x, 100.0, x + 80.0, 100.0 + rng.random_range(20.0..90.0)], rng.random_range(-PI..PI), None);
                    l.occluded = rng.random_range(0..3);
                    l
                })
                .collect();
            let mut det = Vec::new();
            for g in &gt {
                if rng.random_bool(0.8) {
                    let j = |rng: &mut ChaCha8Rng| rng.random_range(-8.0..8.0);
                    let bbox = [g.bbox[0] + j(rng), g.bbox[1] + j(rng), g.bbox[2] + j(rng), g.bbox[3] + j(rng)];
                    det.push(car(bbox, g.alpha + rng.random_range(-1.0..1.0), Some(rng.random_range(0.0..1.0))));
                }
            }
            for _ in 0..rng.random_range(0..3) {
                let x = rng.random_range(0.0..1200.0);
                det.push(car([x, 150.0, x + 60.0, 210.0], 0.0, Some(rng.random_range(0.0..1.0))));
            }
            Frame { gt, det }
        })
        .collect()
}

#[test]
fn random_sets_against_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let frames = noisy_frames(&mut rng);
        let p = image_params(Difficulty::Hard);
        let ap = average_precision(&frames, &p).ap;
        let o = aos(&frames, &p);
        assert!(o <= ap + 1e-15);
        assert!((ap - reference_ap(&frames, &p, false)).abs() < 1e-12);
        assert!((o - reference_ap(&frames, &p, true)).abs() < 1e-12);
    }
}

#[test]
fn confident_correct_detection_never_lowers_ap() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let mut frames = noisy_frames(&mut rng);
        let p = image_params(Difficulty::Hard);
        let before = average_precision(&frames, &p).ap;
        // An exact copy of a ground truth that nothing has claimed yet.
        let f = &mut frames[0];
        let unclaimed = f.gt.iter().find(|g| {
            !f.det.iter().any(|d| iou_2d(&d.bbox, &g.bbox) >= 0.7)
        });
        let Some(g) = unclaimed.cloned() else { continue };
        f.det.push(KittiLabel { score: Some(2.0), ..g });
        assert!(average_precision(&frames, &p).ap >= before - 1e-15);
    }
}

fn inside(b: &Box3D, p: &Vector2<f64>) -> bool {
    let (s, c) = b.yaw.sin_cos();
    let (dx, dz) = (p.x - b.t.x, p.y - b.t.z);
    // inverse of rot_y in the x-z plane
    let lx = c * dx - s * dz;
    let lz = s * dx + c * dz;
    lx.abs() <= 0.5 * b.l() && lz.abs() <= 0.5 * b.w()
}

pub(crate) fn monte_carlo_bev_iou(a: &Box3D, b: &Box3D, samples: usize, rng: &mut ChaCha8Rng) -> f64 {
    let corners: Vec<Vector2<f64>> = a.bev_corners().into_iter().chain(b.bev_corners()).collect();
    let lo = corners.iter().fold(Vector2::repeat(f64::INFINITY), |m, p| m.inf(p));
    let hi = corners.iter().fold(Vector2::repeat(f64::NEG_INFINITY), |m, p| m.sup(p));
    let (mut both, mut any) = (0usize, 0usize);
    for _ in 0..samples {
        let p = Vector2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        let (ia, ib) = (inside(a, &p), inside(b, &p));
        both += (ia && ib) as usize;
        any += (ia || ib) as usize;
    }
    both as f64 / any.max(1) as f64
}

#[test]
fn polygon_iou_agrees_with_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let mut b = || {
            Box3D::new(
                Vector3::new(1.5, rng.random_range(1.0..2.5), rng.random_range(2.0..5.0)),
                Vector3::new(rng.random_range(-1.5..1.5), 1.6, 10.0 + rng.random_range(-1.5..1.5)),
                rng.random_range(-PI..PI),
            )
        };
        let (x, y) = (b(), b());
        let mc = monte_carlo_bev_iou(&x, &y, 200_000, &mut rng);
        assert!((bev_iou(&x, &y) - mc).abs() < 1e-2);
    }
}

#[test]
fn report_formats() {
    let mut f = fixture();
    f.det = f.gt.iter().map(|g| KittiLabel { score: Some(0.5), ..g.clone() }).collect();
    let r = evaluate(&[f], &[0.5, 0.7], &Difficulty::ALL, Interpolation::Eleven);
    assert_eq!(r.rows.len(), 6);
    assert!(r.rows.iter().all(|row| row.ap_3d == 1.0 && row.aos == 1.0));
    assert!(r.summary().contains("moderate.iou0.70.ap_3d=1.000000\n"));
    assert!(r.text().contains("11-point"));
}
