use rand::Rng;

use super::{letterbox, transform_boxes, Affine, AugmentConfig, LabeledImage};
use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TilePlacement {
    pub scale: f64,
    pub rotation_deg: f64,
}

impl TilePlacement {
    pub const PLAIN: Self = Self {
        scale: 1.0,
        rotation_deg: 0.0,
    };
}

/// Split point on the `2s x 2s` canvas and the per-tile jitter, tiles in
/// top-left, top-right, bottom-left, bottom-right order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MosaicPlan {
    pub target: usize,
    pub center: (usize, usize),
    pub tiles: [TilePlacement; 4],
}

impl MosaicPlan {
    /// Split at the exact middle with unit scale and no rotation.
    pub fn centered(target: usize) -> Self {
        Self {
            target,
            center: (target, target),
            tiles: [TilePlacement::PLAIN; 4],
        }
    }

    /// Centre drawn uniformly from `[s/2, 3s/2]` on each axis.
    pub fn sample(cfg: &AugmentConfig, rng: &mut impl Rng) -> Self {
        let s = cfg.target_size;
        let (lo, hi) = (s.div_ceil(2), 3 * s / 2);
        let cx = rng.random_range(lo..=hi);
        let cy = rng.random_range(lo..=hi);
        let tiles = [(); 4].map(|_| TilePlacement {
            scale: cfg.scale_range.sample(rng),
            rotation_deg: cfg.rotation_deg.sample(rng),
        });
        Self {
            target: s,
            center: (cx, cy),
            tiles,
        }
    }

    pub fn canvas_size(&self) -> usize {
        2 * self.target
    }

    /// Canvas region `(x0, y0, x1, y1)` owned by tile `i`.
    pub fn quadrant(&self, i: usize) -> (usize, usize, usize, usize) {
        let n = self.canvas_size();
        let (cx, cy) = self.center;
        match i {
            0 => (0, 0, cx, cy),
            1 => (cx, 0, n, cy),
            2 => (0, cy, cx, n),
            _ => (cx, cy, n, n),
        }
    }

    /// Tile-to-canvas map. The tile is fitted so its long side equals the
    /// target size, jittered about its own centre, then placed with the
    /// corner nearest the split point on the split point.
    pub fn tile_affine(&self, i: usize, width: usize, height: usize) -> Affine {
        let (w, h) = (width as f64, height as f64);
        let t = &self.tiles[i];
        let sc = self.target as f64 / w.max(h) * t.scale;
        let (cx, cy) = (self.center.0 as f64, self.center.1 as f64);
        let (hw, hh) = (sc * w / 2.0, sc * h / 2.0);
        let (px, py) = match i {
            0 => (cx - hw, cy - hh),
            1 => (cx + hw, cy - hh),
            2 => (cx - hw, cy + hh),
            _ => (cx + hw, cy + hh),
        };
        Affine::translation(px, py)
            .after(&Affine::rotation_deg(t.rotation_deg))
            .after(&Affine::scaling(sc))
            .after(&Affine::translation(-w / 2.0, -h / 2.0))
    }
}

fn check_tiles(tiles: &[LabeledImage]) -> Result<usize> {
    if tiles.len() < 4 {
        return Err(Error::invalid(format!(
            "mosaic needs 4 tiles, got {}",
            tiles.len()
        )));
    }
    let c = tiles[0].channels();
    for t in &tiles[..4] {
        t.validate()?;
        if t.channels() != c {
            return Err(Error::shape("tile channels", c, t.channels()));
        }
    }
    Ok(c)
}

/// Bilinear sample at continuous position `(x, y)` in pixel-edge coordinates;
/// `None` outside the image.
fn sample_at(img: &Tensor, x: f64, y: f64, out: &mut [f64]) -> bool {
    let (h, w, c) = (img.shape()[0], img.shape()[1], img.shape()[2]);
    if !(x >= 0.0 && y >= 0.0 && x <= w as f64 && y <= h as f64) {
        return false;
    }
    let sx = (x - 0.5).clamp(0.0, (w - 1) as f64);
    let sy = (y - 0.5).clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
    let d = img.data();
    for (ch, o) in out.iter_mut().enumerate() {
        let at = |yy: usize, xx: usize| d[(yy * w + xx) * c + ch];
        let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
        let bot = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
        *o = top * (1.0 - fy) + bot * fy;
    }
    true
}

/// Stitches four tiles onto the full `2s x 2s` canvas according to `plan`,
/// without the final letterbox.
pub fn mosaic_canvas(
    tiles: &[LabeledImage],
    plan: &MosaicPlan,
    min_visible_frac: f64,
    pad_value: f64,
) -> Result<LabeledImage> {
    let c = check_tiles(tiles)?;
    let n = plan.canvas_size();
    let mut canvas = Tensor::full(&[n, n, c], pad_value);
    let (mut boxes, mut classes, mut weights) = (Vec::new(), Vec::new(), Vec::new());
    let mut px = vec![0.0; c];
    for (i, tile) in tiles[..4].iter().enumerate() {
        let m = plan.tile_affine(i, tile.width(), tile.height());
        let inv = m.inverse()?;
        let (x0, y0, x1, y1) = plan.quadrant(i);
        for y in y0..y1 {
            for x in x0..x1 {
                let (sx, sy) = inv.apply(x as f64 + 0.5, y as f64 + 0.5);
                if sample_at(&tile.image, sx, sy, &mut px) {
                    let at = (y * n + x) * c;
                    canvas.data_mut()[at..at + c].copy_from_slice(&px);
                }
            }
        }
        let (ox, oy) = (x0 as f64, y0 as f64);
        let local = Affine::translation(-ox, -oy).after(&m);
        let mapped = transform_boxes(
            &tile.boxes,
            &local,
            (x1 - x0) as f64,
            (y1 - y0) as f64,
            min_visible_frac,
        )?;
        for (k, (b, kept)) in mapped.into_iter().enumerate() {
            if kept {
                boxes.push(b.translate(ox, oy));
                classes.push(tile.classes[k]);
                weights.push(tile.weights[k]);
            }
        }
    }
    Ok(LabeledImage {
        image: canvas,
        boxes,
        classes,
        weights,
    })
}

/// Mosaic with a freshly sampled plan, letterboxed back to `target_size`.
pub fn mosaic(
    tiles: &[LabeledImage],
    cfg: &AugmentConfig,
    rng: &mut impl Rng,
) -> Result<LabeledImage> {
    check_tiles(tiles)?;
    let plan = MosaicPlan::sample(cfg, rng);
    let canvas = mosaic_canvas(tiles, &plan, cfg.min_visible_frac, cfg.pad_value)?;
    letterbox(&canvas, cfg.target_size, cfg.pad_value)
}

/// `lambda * a + (1 - lambda) * b`, with box weights scaled by each side's share.
pub fn mixup_with_lambda(a: &LabeledImage, b: &LabeledImage, lambda: f64) -> Result<LabeledImage> {
    if a.image.shape() != b.image.shape() {
        return Err(Error::invalid(format!(
            "mixup inputs differ in shape: {:?} vs {:?}",
            a.image.shape(),
            b.image.shape()
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!(
            "mixup lambda {lambda} outside [0, 1]"
        )));
    }
    let data = a
        .image
        .data()
        .iter()
        .zip(b.image.data())
        .map(|(x, y)| (lambda * x + (1.0 - lambda) * y).clamp(0.0, 1.0))
        .collect();
    let image = Tensor::new(a.image.shape().to_vec(), data)?;
    let mut out = LabeledImage {
        image,
        boxes: a.boxes.clone(),
        classes: a.classes.clone(),
        weights: a.weights.iter().map(|w| w * lambda).collect(),
    };
    out.boxes.extend_from_slice(&b.boxes);
    out.classes.extend_from_slice(&b.classes);
    out.weights
        .extend(b.weights.iter().map(|w| w * (1.0 - lambda)));
    Ok(out)
}

pub fn mixup(
    a: &LabeledImage,
    b: &LabeledImage,
    cfg: &AugmentConfig,
    rng: &mut impl Rng,
) -> Result<LabeledImage> {
    let lambda = cfg.mixup_range.sample(rng);
    mixup_with_lambda(a, b, lambda)
}
