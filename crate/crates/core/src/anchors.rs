//! Anchor recalibration by K-means over box shapes with a `1 - IoU` distance.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::seeded;
use crate::{Error, Result};

pub const DEFAULT_K: usize = 9;
pub const DEFAULT_MAX_ITER: usize = 300;

/// IoU of two `(w, h)` shapes centred on the origin.
pub fn wh_iou(a: (f64, f64), b: (f64, f64)) -> f64 {
    let inter = a.0.min(b.0) * a.1.min(b.1);
    inter / (a.0 * a.1 + b.0 * b.1 - inter)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet {
    /// `(width, height)` sorted by area, ties by width.
    pub anchors: Vec<(f64, f64)>,
    pub mean_best_iou: f64,
}

impl AnchorSet {
    fn from_centroids(mut anchors: Vec<(f64, f64)>, boxes: &[(f64, f64)]) -> Self {
        anchors.sort_by(|a, b| {
            (a.0 * a.1)
                .total_cmp(&(b.0 * b.1))
                .then(a.0.total_cmp(&b.0))
                .then(a.1.total_cmp(&b.1))
        });
        let mean_best_iou = boxes
            .iter()
            .map(|&b| anchors.iter().map(|&a| wh_iou(a, b)).fold(0.0, f64::max))
            .sum::<f64>()
            / boxes.len() as f64;
        Self {
            anchors,
            mean_best_iou,
        }
    }

    /// Plain-text anchor file: a `#` header, then one `width height` per line.
    pub fn to_text(&self, seed: u64) -> String {
        let mut s = format!(
            "# k={} seed={} mean_best_iou={:.6}\n",
            self.anchors.len(),
            seed,
            self.mean_best_iou
        );
        for (w, h) in &self.anchors {
            let _ = writeln!(s, "{w:.4} {h:.4}");
        }
        s
    }

    /// Reads the anchor lines of [`AnchorSet::to_text`] output; the header's
    /// `mean_best_iou` is taken as recorded.
    pub fn parse(text: &str) -> Result<Self> {
        let mut anchors = Vec::new();
        let mut mean_best_iou = f64::NAN;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(header) = line.strip_prefix('#') {
                if let Some(v) = header
                    .split_whitespace()
                    .find_map(|kv| kv.strip_prefix("mean_best_iou="))
                {
                    mean_best_iou = v.parse().map_err(|_| Error::Parse {
                        line: i + 1,
                        msg: format!("bad mean_best_iou {v:?}"),
                    })?;
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let nums: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    line: i + 1,
                    msg: format!("{e}"),
                })?;
            match nums[..] {
                [w, h] if w > 0.0 && h > 0.0 => anchors.push((w, h)),
                _ => {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: "expected two positive numbers".into(),
                    })
                }
            }
        }
        if anchors.is_empty() {
            return Err(Error::EmptyOutput("anchor file has no anchors".into()));
        }
        Ok(Self {
            anchors,
            mean_best_iou,
        })
    }
}

fn validate(boxes: &[(f64, f64)], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > boxes.len() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the {} available boxes",
            boxes.len()
        )));
    }
    if let Some(b) = boxes
        .iter()
        .find(|b| !(b.0 > 0.0 && b.1 > 0.0 && b.0.is_finite() && b.1.is_finite()))
    {
        return Err(Error::invalid(format!(
            "box dimensions must be positive, got {b:?}"
        )));
    }
    Ok(())
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    1.0 - wh_iou(a, b)
}

fn kmeans_pp(points: &[(f64, f64)], k: usize, rng: &mut impl Rng) -> Vec<(f64, f64)> {
    let mut centroids = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|&p| dist(p, centroids[0]).powi(2))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random_range(0.0..total);
            d2.iter()
                .position(|&d| {
                    r -= d;
                    r < 0.0 && d > 0.0
                })
                .unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap_or(0))
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[pick];
        centroids.push(c);
        for (d, &p) in d2.iter_mut().zip(points) {
            *d = d.min(dist(p, c).powi(2));
        }
    }
    centroids
}

fn assign(points: &[(f64, f64)], centroids: &[(f64, f64)]) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let labels = points
        .iter()
        .map(|&p| {
            let (best, d) = centroids
                .iter()
                .enumerate()
                .map(|(j, &c)| (j, dist(p, c)))
                .fold(
                    (0, f64::INFINITY),
                    |acc, x| if x.1 < acc.1 { x } else { acc },
                );
            inertia += d;
            best
        })
        .collect();
    (labels, inertia)
}

/// K-means over origin-centred shapes.
///
/// A cluster's centroid moves to the member mean only when that does not
/// raise the cluster's own inertia, so total inertia never increases.
pub fn kmeans_anchors(
    boxes: &[(f64, f64)],
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<AnchorSet> {
    kmeans_anchors_traced(boxes, k, seed, max_iter).map(|(set, _)| set)
}

/// As [`kmeans_anchors`], also returning the total inertia after every
/// assignment step.
pub fn kmeans_anchors_traced(
    boxes: &[(f64, f64)],
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<(AnchorSet, Vec<f64>)> {
    validate(boxes, k)?;
    let mut points = boxes.to_vec();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut rng = seeded(seed);
    let mut centroids = kmeans_pp(&points, k, &mut rng);
    let (mut labels, inertia) = assign(&points, &centroids);
    let mut history = vec![inertia];

    for _ in 0..max_iter {
        let mut moved = false;
        for j in 0..k {
            let members: Vec<(f64, f64)> = points
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == j)
                .map(|(&p, _)| p)
                .collect();
            if members.is_empty() {
                let far = points
                    .iter()
                    .zip(&labels)
                    .map(|(&p, &l)| dist(p, centroids[l]))
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |acc, x| if x.1 > acc.1 { x } else { acc },
                    )
                    .0;
                if points[far] != centroids[j] {
                    centroids[j] = points[far];
                    moved = true;
                }
                continue;
            }
            let n = members.len() as f64;
            let mean = (
                members.iter().map(|m| m.0).sum::<f64>() / n,
                members.iter().map(|m| m.1).sum::<f64>() / n,
            );
            let cost = |c| members.iter().map(|&m| dist(m, c)).sum::<f64>();
            if mean != centroids[j] && cost(mean) <= cost(centroids[j]) {
                centroids[j] = mean;
                moved = true;
            }
        }
        let (next, inertia) = assign(&points, &centroids);
        history.push(inertia);
        let stable = next == labels;
        labels = next;
        if stable && !moved {
            break;
        }
    }
    Ok((AnchorSet::from_centroids(centroids, &points), history))
}

/// Best [`kmeans_anchors`] result by `mean_best_iou` over several seeds.
pub fn kmeans_anchors_best(
    boxes: &[(f64, f64)],
    k: usize,
    seeds: &[u64],
    max_iter: usize,
) -> Result<AnchorSet> {
    let mut best: Option<AnchorSet> = None;
    for &s in seeds {
        let set = kmeans_anchors(boxes, k, s, max_iter)?;
        if best
            .as_ref()
            .is_none_or(|b| set.mean_best_iou > b.mean_best_iou)
        {
            best = Some(set);
        }
    }
    best.ok_or_else(|| Error::invalid("no seeds given"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_clusters() -> Vec<(f64, f64)> {
        let mut v = vec![(10.0, 10.0); 50];
        v.extend(vec![(100.0, 100.0); 50]);
        v
    }

    #[test]
    fn identical_boxes_single_centroid() {
        let set = kmeans_anchors(&[(7.0, 3.0); 12], 1, 0, 300).unwrap();
        assert_eq!(set.anchors, vec![(7.0, 3.0)]);
        assert_eq!(set.mean_best_iou, 1.0);
    }

    #[test]
    fn two_cluster_fixture_is_exact() {
        for seed in 0..10 {
            let set = kmeans_anchors(&two_clusters(), 2, seed, 300).unwrap();
            assert_eq!(set.anchors, vec![(10.0, 10.0), (100.0, 100.0)]);
            assert_eq!(set.mean_best_iou, 1.0);
        }
    }

    #[test]
    fn two_cluster_partition_is_brute_force_optimal() {
        // Points within a group are identical, so every 2-partition is fixed
        // by how many of each group fall in the first cluster.
        let cost = |small: usize, large: usize| {
            let n = (small + large) as f64;
            let m = (10.0 * small as f64 + 100.0 * large as f64) / n;
            small as f64 * dist((10.0, 10.0), (m, m)) + large as f64 * dist((100.0, 100.0), (m, m))
        };
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..=50 {
            for b in 0..=50 {
                if a + b == 0 || a + b == 100 {
                    continue;
                }
                let c = cost(a, b) + cost(50 - a, 50 - b);
                if c < best.0 {
                    best = (c, a, b);
                }
            }
        }
        assert_eq!(best, (0.0, 0, 50));
    }

    #[test]
    fn errors() {
        assert!(kmeans_anchors(&[(1.0, 1.0)], 2, 0, 10).is_err());
        assert!(kmeans_anchors(&[(1.0, 0.0), (2.0, 2.0)], 1, 0, 10).is_err());
        assert!(kmeans_anchors(&[(1.0, 1.0)], 0, 0, 10).is_err());
    }

    #[test]
    fn inertia_is_monotone_and_order_invariant() {
        let mut rng = seeded(77);
        let pts: Vec<(f64, f64)> = (0..200)
            .map(|_| (rng.random_range(4.0..200.0), rng.random_range(4.0..200.0)))
            .collect();
        let (set, hist) = kmeans_anchors_traced(&pts, 9, 3, 300).unwrap();
        assert!(hist.windows(2).all(|w| w[1] <= w[0]));
        let mut rev = pts.clone();
        rev.reverse();
        assert_eq!(kmeans_anchors(&rev, 9, 3, 300).unwrap(), set);
        assert_eq!(set.anchors.len(), 9);
        assert!(set
            .anchors
            .windows(2)
            .all(|w| w[0].0 * w[0].1 <= w[1].0 * w[1].1));
    }

    #[test]
    fn anchor_file_round_trip() {
        let set = kmeans_anchors(&two_clusters(), 2, 1, 300).unwrap();
        let text = set.to_text(1);
        assert!(text.starts_with("# k=2 seed=1 mean_best_iou=1.000000\n"));
        assert_eq!(AnchorSet::parse(&text).unwrap(), set);
        assert!(AnchorSet::parse("# nothing\n").is_err());
        assert!(AnchorSet::parse("1 x\n").is_err());
    }
}
