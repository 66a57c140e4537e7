use super::iou::{bev_iou, coverage_2d, iou_2d, iou_3d};
use crate::kitti::{label_to_box3d, KittiLabel};
use crate::par;

/// Ground truth visible enough to count at a benchmark difficulty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifficultyFilter {
    pub min_height: f64,
    pub max_occlusion: i32,
    pub max_truncation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Difficulty {
    Easy,
    Moderate,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Moderate, Difficulty::Hard];

    pub fn filter(self) -> DifficultyFilter {
        let (min_height, max_occlusion, max_truncation) = match self {
            Difficulty::Easy => (40.0, 0, 0.15),
            Difficulty::Moderate => (25.0, 1, 0.3),
            Difficulty::Hard => (25.0, 2, 0.5),
        };
        DifficultyFilter { min_height, max_occlusion, max_truncation }
    }

    pub fn name(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Moderate => "moderate",
            Difficulty::Hard => "hard",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.name() == s.to_ascii_lowercase())
    }
}

impl DifficultyFilter {
    pub fn accepts(&self, l: &KittiLabel) -> bool {
        l.bbox_height() >= self.min_height
            && l.occluded <= self.max_occlusion
            && l.truncated <= self.max_truncation
    }
}

/// Overlap measure used to match detections to ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Image,
    Bev,
    Box3D,
}

impl Metric {
    pub fn iou(self, a: &KittiLabel, b: &KittiLabel) -> f64 {
        match self {
            Metric::Image => iou_2d(&a.bbox, &b.bbox),
            Metric::Bev => bev_iou(&label_to_box3d(a), &label_to_box3d(b)),
            Metric::Box3D => iou_3d(&label_to_box3d(a), &label_to_box3d(b)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Recall 0, 0.1, ..., 1.
    #[default]
    Eleven,
    /// Recall 1/40, 2/40, ..., 1.
    Forty,
}

impl Interpolation {
    fn recall_points(self) -> Vec<f64> {
        match self {
            Interpolation::Eleven => (0..=10).map(|i| i as f64 / 10.0).collect(),
            Interpolation::Forty => (1..=40).map(|i| i as f64 / 40.0).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalParams {
    pub class: &'static str,
    pub metric: Metric,
    pub iou_threshold: f64,
    pub filter: DifficultyFilter,
    pub interpolation: Interpolation,
    /// A detection that matches nothing but lies more than this fraction
    /// inside a DontCare region is ignored.
    pub dontcare_coverage: f64,
}

impl EvalParams {
    pub fn new(metric: Metric, iou_threshold: f64, difficulty: Difficulty) -> Self {
        Self {
            class: "Car",
            metric,
            iou_threshold,
            filter: difficulty.filter(),
            interpolation: Interpolation::Eleven,
            dontcare_coverage: 0.5,
        }
    }
}

/// Ground truth and detections of one image.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Frame {
    pub gt: Vec<KittiLabel>,
    pub det: Vec<KittiLabel>,
}

/// Outcome of one counted detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub score: f64,
    pub tp: bool,
    /// Orientation similarity of a true positive, 0 otherwise.
    pub similarity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GtRole {
    Valid,
    Ignored,
    DontCare,
    Other,
}

/// Vans count as neither hits nor misses for cars, people sitting likewise
/// for pedestrians.
fn neighbour_class(class: &str) -> Option<&'static str> {
    match class {
        "Car" => Some("Van"),
        "Pedestrian" => Some("Person_sitting"),
        _ => None,
    }
}

fn gt_role(l: &KittiLabel, p: &EvalParams) -> GtRole {
    if l.is_dontcare() {
        GtRole::DontCare
    } else if l.kind == p.class {
        if p.filter.accepts(l) {
            GtRole::Valid
        } else {
            GtRole::Ignored
        }
    } else if neighbour_class(p.class) == Some(l.kind.as_str()) {
        GtRole::Ignored
    } else {
        GtRole::Other
    }
}

/// Greedy matching in descending score order. Each detection takes the
/// best-overlapping unmatched ground truth at or above the threshold,
/// preferring counted over ignored ground truth. Matches to ignored ground
/// truth, DontCare hits and too-small detections are dropped.
pub fn match_frame(frame: &Frame, p: &EvalParams) -> (Vec<Scored>, usize) {
    let roles: Vec<GtRole> = frame.gt.iter().map(|g| gt_role(g, p)).collect();
    let n_gt = roles.iter().filter(|r| **r == GtRole::Valid).count();
    let mut order: Vec<usize> = (0..frame.det.len()).filter(|i| frame.det[*i].kind == p.class).collect();
    order.sort_by(|a, b| frame.det[*b].score.unwrap_or(0.0).total_cmp(&frame.det[*a].score.unwrap_or(0.0)));

    let mut taken = vec![false; frame.gt.len()];
    let mut out = Vec::new();
    for i in order {
        let d = &frame.det[i];
        let mut best: Option<(bool, f64, usize)> = None;
        for (j, g) in frame.gt.iter().enumerate() {
            if taken[j] || !matches!(roles[j], GtRole::Valid | GtRole::Ignored) {
                continue;
            }
            let iou = p.metric.iou(d, g);
            if iou < p.iou_threshold {
                continue;
            }
            let key = (roles[j] == GtRole::Valid, iou, j);
            if best.is_none_or(|b| (key.0, key.1) > (b.0, b.1)) {
                best = Some(key);
            }
        }
        let score = d.score.unwrap_or(0.0);
        match best {
            Some((valid, _, j)) => {
                taken[j] = true;
                if valid {
                    let da = d.alpha - frame.gt[j].alpha;
                    out.push(Scored { score, tp: true, similarity: 0.5 * (1.0 + da.cos()) });
                }
            }
            None => {
                let small = d.bbox_height() < p.filter.min_height;
                let in_dontcare = frame
                    .gt
                    .iter()
                    .zip(&roles)
                    .any(|(g, r)| *r == GtRole::DontCare && coverage_2d(&d.bbox, &g.bbox) > p.dontcare_coverage);
                if !small && !in_dontcare {
                    out.push(Scored { score, tp: false, similarity: 0.0 });
                }
            }
        }
    }
    (out, n_gt)
}

/// Precision–recall samples and the interpolated average.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub recall: Vec<f64>,
    pub precision: Vec<f64>,
    pub ap: f64,
}

fn interpolate(recall: &[f64], values: &[f64], interp: Interpolation) -> f64 {
    let pts = interp.recall_points();
    let sum: f64 = pts
        .iter()
        .map(|r| {
            recall
                .iter()
                .zip(values)
                .filter(|(rc, _)| **rc >= *r)
                .map(|(_, v)| *v)
                .fold(0.0, f64::max)
        })
        .sum();
    sum / pts.len() as f64
}

/// Curves for detection precision and orientation similarity from pooled
/// matches.
pub fn curves(mut scored: Vec<Scored>, n_gt: usize, interp: Interpolation) -> (PrCurve, f64) {
    scored.sort_by(|a, b| b.score.total_cmp(&a.score));
    let (mut tp, mut sim) = (0.0, 0.0);
    let mut recall = Vec::with_capacity(scored.len());
    let mut precision = Vec::with_capacity(scored.len());
    let mut orientation = Vec::with_capacity(scored.len());
    for (i, s) in scored.iter().enumerate() {
        if s.tp {
            tp += 1.0;
            sim += s.similarity;
        }
        let n = (i + 1) as f64;
        recall.push(if n_gt == 0 { 0.0 } else { tp / n_gt as f64 });
        precision.push(tp / n);
        orientation.push(sim / n);
    }
    if n_gt == 0 {
        return (PrCurve { recall, precision, ap: 0.0 }, 0.0);
    }
    let ap = interpolate(&recall, &precision, interp);
    let aos = interpolate(&recall, &orientation, interp);
    (PrCurve { recall, precision, ap }, aos)
}

fn pooled(frames: &[Frame], p: &EvalParams) -> (Vec<Scored>, usize) {
    let per = par::map(frames, |f| match_frame(f, p));
    let n_gt = per.iter().map(|(_, n)| n).sum();
    (per.into_iter().flat_map(|(s, _)| s).collect(), n_gt)
}

pub fn average_precision(frames: &[Frame], p: &EvalParams) -> PrCurve {
    let (scored, n_gt) = pooled(frames, p);
    curves(scored, n_gt, p.interpolation).0
}

/// Average orientation similarity, matching on image boxes at `iou_threshold`.
pub fn aos(frames: &[Frame], p: &EvalParams) -> f64 {
    let p = EvalParams { metric: Metric::Image, ..*p };
    let (scored, n_gt) = pooled(frames, &p);
    curves(scored, n_gt, p.interpolation).1
}
