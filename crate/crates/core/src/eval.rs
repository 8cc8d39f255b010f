//! Class-agnostic AP evaluation over IoU thresholds 0.50:0.05:0.95.
//!
//! Per image, detections are sorted by score (stable, so ties keep input
//! order), reduced by greedy NMS and truncated to `max_detections`. At each
//! threshold every detection is greedily matched, in score order, to the
//! unmatched ground truth with the highest IoU (ties go to the earlier ground
//! truth); it is a true positive when that IoU is at least the threshold.
//! Detections from all images are then ranked by score (ties by image order,
//! then per-image rank) and AP is the mean of the 101-point interpolated
//! precision at recall levels 0.00, 0.01, ..., 1.00.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coco::{CocoAnnotation, CocoDataset, Detection, Rle};

pub const RECALL_POINTS: usize = 101;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("detection {index} refers to unknown image_id {image_id}")]
    UnknownImage { index: usize, image_id: u64 },
    #[error("mask sizes differ: {a:?} vs {b:?} (height, width)")]
    DimensionMismatch { a: [u32; 2], b: [u32; 2] },
    #[error("invalid evaluation config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IouType {
    Mask,
    Bbox,
}

impl IouType {
    pub fn as_str(self) -> &'static str {
        match self {
            IouType::Mask => "mask",
            IouType::Bbox => "bbox",
        }
    }
}

impl std::fmt::Display for IouType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Anything with a mask and a box that IoU can be computed on.
pub trait Instance {
    fn segmentation(&self) -> &Rle;
    fn bbox(&self) -> [f64; 4];
}

impl Instance for CocoAnnotation {
    fn segmentation(&self) -> &Rle {
        &self.segmentation
    }

    fn bbox(&self) -> [f64; 4] {
        self.bbox
    }
}

impl Instance for Detection {
    fn segmentation(&self) -> &Rle {
        &self.segmentation
    }

    fn bbox(&self) -> [f64; 4] {
        self.bbox
    }
}

/// `0.50, 0.55, ..., 0.95`
pub fn default_thresholds() -> Vec<f64> {
    (0..10).map(|i| f64::from(50 + 5 * i) / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub iou_type: IouType,
    pub iou_thresholds: Vec<f64>,
    /// Detections overlapping an already kept one by more than this are dropped.
    pub nms_threshold: f64,
    pub nms_iou_type: IouType,
    pub max_detections: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_type: IouType::Mask,
            iou_thresholds: default_thresholds(),
            nms_threshold: 0.5,
            nms_iou_type: IouType::Bbox,
            max_detections: 100,
        }
    }
}

impl EvalConfig {
    pub fn with_iou_type(iou_type: IouType) -> Self {
        Self { iou_type, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.iou_thresholds.is_empty() {
            return Err(EvalError::Config("no IoU thresholds".into()));
        }
        let in_range = |t: f64| t > 0.0 && t <= 1.0;
        if let Some(t) = self.iou_thresholds.iter().find(|t| !in_range(**t)) {
            return Err(EvalError::Config(format!("IoU threshold {t} outside (0, 1]")));
        }
        if self.iou_thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EvalError::Config("IoU thresholds must be strictly increasing".into()));
        }
        if !in_range(self.nms_threshold) {
            return Err(EvalError::Config(format!("NMS threshold {} outside (0, 1]", self.nms_threshold)));
        }
        Ok(())
    }
}

/// Continuous IoU of two `[x, y, w, h]` boxes; 0 when the union is empty.
pub fn box_iou(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let iw = ((a[0] + a[2]).min(b[0] + b[2]) - a[0].max(b[0])).max(0.0);
    let ih = ((a[1] + a[3]).min(b[1] + b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let union = a[2] * a[3] + b[2] * b[3] - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

pub fn mask_iou(a: &Rle, b: &Rle) -> Result<f64, EvalError> {
    let inter = a
        .intersection_area(b)
        .ok_or(EvalError::DimensionMismatch { a: a.size, b: b.size })?;
    let union = a.area() + b.area() - inter;
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

pub fn iou(a: &impl Instance, b: &impl Instance, iou_type: IouType) -> Result<f64, EvalError> {
    match iou_type {
        IouType::Mask => mask_iou(a.segmentation(), b.segmentation()),
        IouType::Bbox => Ok(box_iou(&a.bbox(), &b.bbox())),
    }
}

/// Indices of `dets` sorted by descending score; ties keep input order.
pub fn score_order(dets: &[&Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));
    order
}

/// Greedy non-maximum suppression. Returns kept indices into `dets` in
/// descending score order.
pub fn nms(dets: &[&Detection], threshold: f64, iou_type: IouType) -> Result<Vec<usize>, EvalError> {
    let mut kept: Vec<usize> = Vec::new();
    for i in score_order(dets) {
        let mut keep = true;
        for &k in &kept {
            if iou(dets[i], dets[k], iou_type)? > threshold {
                keep = false;
                break;
            }
        }
        if keep {
            kept.push(i);
        }
    }
    Ok(kept)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionMatch {
    /// Index into the detections passed to [`match_detections`].
    pub detection: usize,
    pub score: f64,
    /// Index of the matched ground truth, if any.
    pub gt: Option<usize>,
    /// IoU with the matched ground truth, or the best available IoU when unmatched.
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// One entry per detection, in descending score order.
    pub matches: Vec<DetectionMatch>,
    pub gt_count: usize,
}

impl MatchResult {
    pub fn true_positives(&self) -> usize {
        self.matches.iter().filter(|m| m.gt.is_some()).count()
    }

    pub fn false_positives(&self) -> usize {
        self.matches.len() - self.true_positives()
    }

    pub fn false_negatives(&self) -> usize {
        self.gt_count - self.true_positives()
    }

    pub fn outcomes(&self) -> Vec<(f64, bool)> {
        self.matches.iter().map(|m| (m.score, m.gt.is_some())).collect()
    }
}

/// Greedy matching given `ious[d][g]` for detections already in rank order.
fn match_ranked(ious: &[Vec<f64>], gt_count: usize, threshold: f64) -> Vec<Option<(usize, f64)>> {
    let mut taken = vec![false; gt_count];
    ious.iter()
        .map(|row| {
            let mut best: Option<(usize, f64)> = None;
            for (g, &v) in row.iter().enumerate() {
                if !taken[g] && best.is_none_or(|(_, b)| v > b) {
                    best = Some((g, v));
                }
            }
            match best {
                Some((g, v)) if v >= threshold => {
                    taken[g] = true;
                    Some((g, v))
                }
                _ => None,
            }
        })
        .collect()
}

/// Matches the detections of one image against its ground truth at `threshold`.
pub fn match_detections<G: Instance>(
    gts: &[&G],
    dets: &[&Detection],
    threshold: f64,
    iou_type: IouType,
) -> Result<MatchResult, EvalError> {
    let order = score_order(dets);
    let ious = iou_matrix(gts, dets, &order, iou_type)?;
    let assigned = match_ranked(&ious, gts.len(), threshold);
    let matches = order
        .iter()
        .zip(&ious)
        .zip(assigned)
        .map(|((&d, row), a)| DetectionMatch {
            detection: d,
            score: dets[d].score,
            gt: a.map(|(g, _)| g),
            iou: a.map(|(_, v)| v).unwrap_or_else(|| row.iter().copied().fold(0.0, f64::max)),
        })
        .collect();
    Ok(MatchResult { matches, gt_count: gts.len() })
}

fn iou_matrix<G: Instance>(
    gts: &[&G],
    dets: &[&Detection],
    order: &[usize],
    iou_type: IouType,
) -> Result<Vec<Vec<f64>>, EvalError> {
    order
        .iter()
        .map(|&d| gts.iter().map(|g| iou(dets[d], *g, iou_type)).collect())
        .collect()
}

/// Precision/recall curve and interpolated AP for ranked outcomes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApCurve {
    /// `None` when there is no ground truth and no detection.
    pub ap: Option<f64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    /// Interpolated precision at recall `k / 100`, `k = 0..=100`.
    pub interpolated: Vec<f64>,
}

/// AP of `(score, is_true_positive)` outcomes against `gt_count` ground truths.
///
/// Outcomes are ranked by descending score with a stable sort.
pub fn average_precision(outcomes: &[(f64, bool)], gt_count: usize) -> ApCurve {
    let mut ranked = outcomes.to_vec();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut tp = 0usize;
    let mut precision = Vec::with_capacity(ranked.len());
    let mut recall = Vec::with_capacity(ranked.len());
    for (i, &(_, hit)) in ranked.iter().enumerate() {
        tp += usize::from(hit);
        precision.push(tp as f64 / (i + 1) as f64);
        recall.push(if gt_count == 0 { 0.0 } else { tp as f64 / gt_count as f64 });
    }
    if gt_count == 0 {
        let ap = (!ranked.is_empty()).then_some(0.0);
        return ApCurve { ap, precision, recall, interpolated: vec![0.0; RECALL_POINTS] };
    }
    // precision envelope: max precision at this or any later rank
    let mut envelope = precision.clone();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut interpolated = Vec::with_capacity(RECALL_POINTS);
    let mut i = 0;
    for k in 0..RECALL_POINTS {
        let r = k as f64 / 100.0;
        while i < recall.len() && recall[i] < r {
            i += 1;
        }
        interpolated.push(if i < recall.len() { envelope[i] } else { 0.0 });
    }
    let ap = interpolated.iter().sum::<f64>() / RECALL_POINTS as f64;
    ApCurve { ap: Some(ap), precision, recall, interpolated }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdResult {
    pub threshold: f64,
    #[serde(flatten)]
    pub curve: ApCurve,
    pub true_positives: usize,
    pub false_positives: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvalCounts {
    pub images: usize,
    pub ground_truths: usize,
    pub detections: usize,
    pub detections_after_nms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub iou_type: IouType,
    pub thresholds: Vec<ThresholdResult>,
    /// Mean AP over the thresholds; `None` when every threshold is undefined.
    pub map_all: Option<f64>,
    pub counts: EvalCounts,
}

#[derive(Serialize)]
struct ReportSummary<'a> {
    iou_type: IouType,
    ap_per_threshold: BTreeMap<String, Option<f64>>,
    map_all: Option<f64>,
    counts: &'a EvalCounts,
}

impl EvalReport {
    pub fn ap(&self, threshold: f64) -> Option<f64> {
        self.thresholds.iter().find(|t| t.threshold == threshold).and_then(|t| t.curve.ap)
    }

    /// `{iou_type, ap_per_threshold: {"0.50": ..}, map_all, counts}`
    pub fn summary_json(&self) -> serde_json::Value {
        let summary = ReportSummary {
            iou_type: self.iou_type,
            ap_per_threshold: self
                .thresholds
                .iter()
                .map(|t| (format!("{:.2}", t.threshold), t.curve.ap))
                .collect(),
            map_all: self.map_all,
            counts: &self.counts,
        };
        serde_json::to_value(summary).expect("report serializes")
    }

    /// Human-readable table with three decimals.
    pub fn table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "  n/a".to_string(), |v| format!("{v:.3}"));
        let mut s = String::new();
        let _ = writeln!(s, "iou_type {}", self.iou_type);
        let _ = writeln!(s, "{:>9}  {:>5}", "threshold", "AP");
        for t in &self.thresholds {
            let _ = writeln!(s, "{:>9.2}  {}", t.threshold, fmt(t.curve.ap));
        }
        let _ = writeln!(s, "mAP {}", fmt(self.map_all));
        let c = &self.counts;
        let _ = writeln!(
            s,
            "images {}  ground truths {}  detections {} ({} after NMS)",
            c.images, c.ground_truths, c.detections, c.detections_after_nms
        );
        s
    }
}

/// Per-image working state: kept detections in rank order and their IoUs.
struct ImageEval {
    scores: Vec<f64>,
    ious: Vec<Vec<f64>>,
    gt_count: usize,
}

/// Scores `dets` against `gt`. Detections must reference images in `gt`.
pub fn evaluate(gt: &CocoDataset, dets: &[Detection], config: &EvalConfig) -> Result<EvalReport, EvalError> {
    config.validate()?;
    let index: HashMap<u64, usize> = gt.images.iter().enumerate().map(|(i, img)| (img.id, i)).collect();
    let mut gts_by_image: Vec<Vec<&CocoAnnotation>> = vec![Vec::new(); gt.images.len()];
    for a in &gt.annotations {
        if let Some(&i) = index.get(&a.image_id) {
            gts_by_image[i].push(a);
        }
    }
    let mut dets_by_image: Vec<Vec<&Detection>> = vec![Vec::new(); gt.images.len()];
    for (k, d) in dets.iter().enumerate() {
        let &i = index.get(&d.image_id).ok_or(EvalError::UnknownImage { index: k, image_id: d.image_id })?;
        let img = &gt.images[i];
        let expected = [img.height, img.width];
        if d.segmentation.size != expected {
            return Err(EvalError::DimensionMismatch { a: d.segmentation.size, b: expected });
        }
        dets_by_image[i].push(d);
    }

    let images: Vec<ImageEval> = gts_by_image
        .par_iter()
        .zip(&dets_by_image)
        .map(|(gts, dets)| {
            let mut kept = nms(dets, config.nms_threshold, config.nms_iou_type)?;
            kept.truncate(config.max_detections);
            let ious = iou_matrix(gts, dets, &kept, config.iou_type)?;
            Ok(ImageEval { scores: kept.iter().map(|&d| dets[d].score).collect(), ious, gt_count: gts.len() })
        })
        .collect::<Result<_, EvalError>>()?;

    let gt_count: usize = images.iter().map(|e| e.gt_count).sum();
    let thresholds: Vec<ThresholdResult> = config
        .iou_thresholds
        .iter()
        .map(|&t| {
            let mut outcomes = Vec::new();
            for e in &images {
                let assigned = match_ranked(&e.ious, e.gt_count, t);
                outcomes.extend(e.scores.iter().zip(assigned).map(|(&s, a)| (s, a.is_some())));
            }
            let tp = outcomes.iter().filter(|o| o.1).count();
            ThresholdResult {
                threshold: t,
                curve: average_precision(&outcomes, gt_count),
                true_positives: tp,
                false_positives: outcomes.len() - tp,
            }
        })
        .collect();

    let defined: Vec<f64> = thresholds.iter().filter_map(|t| t.curve.ap).collect();
    let map_all = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(EvalReport {
        iou_type: config.iou_type,
        thresholds,
        map_all,
        counts: EvalCounts {
            images: gt.images.len(),
            ground_truths: gt_count,
            detections: dets.len(),
            detections_after_nms: images.iter().map(|e| e.scores.len()).sum(),
        },
    })
}
