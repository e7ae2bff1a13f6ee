//! Detection matching, average precision, mAP@0.5 and a throughput harness.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::boxes::{iou, BBox};
use crate::{Error, Result};

pub const DEFAULT_IOU_THRESH: f64 = 0.5;
pub const DEFAULT_CONF_THRESH: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub class_id: u32,
    pub score: f64,
    pub image_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub bbox: BBox,
    pub class_id: u32,
    pub image_id: String,
}

/// Indices of `scores` sorted by score descending, ties by index.
fn score_order(scores: impl Iterator<Item = f64>) -> Vec<usize> {
    let scores: Vec<f64> = scores.collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Greedy score-ordered matching. Each detection, highest score first, takes
/// the unmatched ground truth of its class and image with the largest IoU,
/// provided that IoU is at least `iou_thresh`. Flags are returned in input
/// order.
pub fn match_detections(dets: &[Detection], gts: &[GroundTruth], iou_thresh: f64) -> Vec<bool> {
    let mut taken = vec![false; gts.len()];
    let mut flags = vec![false; dets.len()];
    for i in score_order(dets.iter().map(|d| d.score)) {
        let d = &dets[i];
        let best = gts
            .iter()
            .enumerate()
            .filter(|(j, g)| !taken[*j] && g.class_id == d.class_id && g.image_id == d.image_id)
            .map(|(j, g)| (j, iou(&d.bbox, &g.bbox)))
            .filter(|&(_, v)| v >= iou_thresh)
            .fold(None, |acc: Option<(usize, f64)>, x| match acc {
                Some(a) if a.1 >= x.1 => Some(a),
                _ => Some(x),
            });
        if let Some((j, _)) = best {
            taken[j] = true;
            flags[i] = true;
        }
    }
    flags
}

/// All-point interpolated AP from TP flags ordered by descending score.
pub fn average_precision(flags: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut tp = 0usize;
    let mut points = Vec::with_capacity(flags.len());
    for (i, &f) in flags.iter().enumerate() {
        tp += f as usize;
        points.push((tp as f64 / n_gt as f64, tp as f64 / (i + 1) as f64));
    }
    let mut ap = 0.0;
    let mut envelope = 0.0f64;
    let mut next_recall = points.last().map_or(0.0, |p| p.0);
    for &(recall, precision) in points.iter().rev() {
        ap += (next_recall - recall) * envelope;
        envelope = envelope.max(precision);
        next_recall = recall;
    }
    ap + next_recall * envelope
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iou_thresh: f64,
    pub conf_thresh: f64,
    pub map50: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub per_class_ap: BTreeMap<u32, f64>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class AP over all detections, and precision/recall/counts over the
/// detections scoring at least `conf_thresh`.
pub fn evaluate(
    dets: &[Detection],
    gts: &[GroundTruth],
    iou_thresh: f64,
    conf_thresh: f64,
) -> Result<EvalReport> {
    if gts.is_empty() {
        return Err(Error::invalid("no ground truths to evaluate against"));
    }
    if !(iou_thresh > 0.0 && iou_thresh < 1.0) {
        return Err(Error::invalid(format!(
            "IoU threshold {iou_thresh} outside (0, 1)"
        )));
    }
    if let Some(d) = dets.iter().find(|d| !(0.0..=1.0).contains(&d.score)) {
        return Err(Error::invalid(format!(
            "detection score {} outside [0, 1]",
            d.score
        )));
    }

    let mut gt_count: HashMap<u32, usize> = HashMap::new();
    for g in gts {
        *gt_count.entry(g.class_id).or_default() += 1;
    }
    let classes: BTreeSet<u32> = gt_count.keys().copied().collect();

    let flags = match_detections(dets, gts, iou_thresh);
    let mut per_class_ap = BTreeMap::new();
    for &c in &classes {
        let idx: Vec<usize> = (0..dets.len()).filter(|&i| dets[i].class_id == c).collect();
        let ordered: Vec<bool> = score_order(idx.iter().map(|&i| dets[i].score))
            .into_iter()
            .map(|k| flags[idx[k]])
            .collect();
        per_class_ap.insert(c, average_precision(&ordered, gt_count[&c]));
    }
    let map50 = per_class_ap.values().sum::<f64>() / per_class_ap.len() as f64;

    let kept: Vec<Detection> = dets
        .iter()
        .filter(|d| d.score >= conf_thresh)
        .cloned()
        .collect();
    let tp = match_detections(&kept, gts, iou_thresh)
        .iter()
        .filter(|&&f| f)
        .count();
    let fp = kept.len() - tp;
    let fn_ = gts.len() - tp;
    Ok(EvalReport {
        iou_thresh,
        conf_thresh,
        map50,
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        tp,
        fp,
        fn_,
        per_class_ap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchResult {
    pub fps: f64,
    pub elapsed_s: f64,
    pub iters: usize,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

/// Runs `warmup` untimed iterations, then times `iters` on a monotonic clock.
pub fn fps_bench(mut workload: impl FnMut(), warmup: usize, iters: usize) -> Result<BenchResult> {
    if iters == 0 {
        return Err(Error::invalid("iters must be at least 1"));
    }
    for _ in 0..warmup {
        workload();
    }
    let mut laps = Vec::with_capacity(iters);
    let start = Instant::now();
    for _ in 0..iters {
        let t = Instant::now();
        workload();
        laps.push(t.elapsed().as_secs_f64() * 1e3);
    }
    let elapsed_s = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
    Ok(BenchResult {
        fps: iters as f64 / elapsed_s,
        elapsed_s,
        iters,
        mean_ms: laps.iter().sum::<f64>() / iters as f64,
        min_ms: laps.iter().copied().fold(f64::INFINITY, f64::min),
        max_ms: laps.iter().copied().fold(0.0, f64::max),
    })
}
