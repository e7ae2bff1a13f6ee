//! Browser bindings for three interactive views: box losses for a
//! prediction/target pair, anchor clustering over box shapes, and the effect
//! of an affine tile transform on a box.
//!
//! Each `*_json` function is plain Rust returning a JSON string; the
//! `#[wasm_bindgen]` wrappers only convert errors.

use serde::Deserialize;
use serde_json::{json, Value};
use tsr_core::anchors::{kmeans_anchors_traced, DEFAULT_MAX_ITER};
use tsr_core::augment::{transform_boxes, Affine};
use tsr_core::boxes::{ciou_loss, eiou_loss, iou, wiou_loss, BBox, LossValue, WiouState};
use wasm_bindgen::prelude::*;

fn bbox(v: [f64; 4]) -> Result<BBox, String> {
    BBox::from_array(v).map_err(|e| e.to_string())
}

fn loss_json(l: &LossValue) -> Value {
    json!({ "value": l.value, "grad": l.grad_pred })
}

/// IoU, CIoU, EIoU and WIoU of `pred` against `gt`, with gradients.
/// `wiou_mean` seeds the running mean of `1 - IoU`.
pub fn losses_json(pred: [f64; 4], gt: [f64; 4], wiou_mean: f64) -> Result<String, String> {
    let (p, g) = (bbox(pred)?, bbox(gt)?);
    let state = WiouState::default()
        .with_mean(wiou_mean)
        .map_err(|e| e.to_string())?;
    let ciou = ciou_loss(&p, &g).map_err(|e| e.to_string())?;
    let eiou = eiou_loss(&p, &g).map_err(|e| e.to_string())?;
    let (wiou, next) = wiou_loss(&p, &g, &state).map_err(|e| e.to_string())?;
    Ok(json!({
        "iou": iou(&p, &g),
        "ciou": loss_json(&ciou),
        "eiou": loss_json(&eiou),
        "wiou": loss_json(&wiou),
        "wiou_next_mean": next.running_mean_iou_loss,
        "enclosing": p.enclosing(&g).to_array(),
    })
    .to_string())
}

#[derive(Deserialize)]
struct Shapes(Vec<(f64, f64)>);

/// K-means anchors for a JSON array of `[w, h]` pairs.
pub fn anchors_json(shapes: &str, k: usize, seed: u64) -> Result<String, String> {
    let Shapes(shapes) = serde_json::from_str(shapes).map_err(|e| e.to_string())?;
    let (set, inertia) =
        kmeans_anchors_traced(&shapes, k, seed, DEFAULT_MAX_ITER).map_err(|e| e.to_string())?;
    Ok(json!({
        "anchors": set.anchors,
        "mean_best_iou": set.mean_best_iou,
        "inertia": inertia,
    })
    .to_string())
}

/// Scales and rotates `b` about the canvas centre, then shifts it by
/// `(tx, ty)`, reporting the rotated corners, the clipped hull and whether
/// the box survives at `min_visible`.
pub fn transform_json(
    b: [f64; 4],
    scale: f64,
    rotation_deg: f64,
    tx: f64,
    ty: f64,
    canvas: f64,
    min_visible: f64,
) -> Result<String, String> {
    let b = bbox(b)?;
    let c = canvas / 2.0;
    let m = Affine::translation(c + tx, c + ty)
        .after(&Affine::rotation_deg(rotation_deg))
        .after(&Affine::scaling(scale))
        .after(&Affine::translation(-c, -c));
    let corners: Vec<(f64, f64)> = [(b.x1, b.y1), (b.x2, b.y1), (b.x2, b.y2), (b.x1, b.y2)]
        .iter()
        .map(|&(x, y)| m.apply(x, y))
        .collect();
    let out = transform_boxes(&[b], &m, canvas, canvas, min_visible).map_err(|e| e.to_string())?;
    let (hull, kept) = out[0];
    Ok(json!({
        "corners": corners,
        "hull": hull.to_array(),
        "kept": kept,
        "determinant": m.determinant(),
    })
    .to_string())
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn box_losses(
    px1: f64,
    py1: f64,
    px2: f64,
    py2: f64,
    gx1: f64,
    gy1: f64,
    gx2: f64,
    gy2: f64,
    wiou_mean: f64,
) -> Result<String, JsError> {
    losses_json([px1, py1, px2, py2], [gx1, gy1, gx2, gy2], wiou_mean).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn cluster_anchors(shapes: &str, k: usize, seed: u64) -> Result<String, JsError> {
    anchors_json(shapes, k, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn transform_box(
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
    scale: f64,
    rotation_deg: f64,
    tx: f64,
    ty: f64,
    canvas: f64,
    min_visible: f64,
) -> Result<String, JsError> {
    transform_json(
        [x1, y1, x2, y2],
        scale,
        rotation_deg,
        tx,
        ty,
        canvas,
        min_visible,
    )
    .map_err(|e| JsError::new(&e))
}
