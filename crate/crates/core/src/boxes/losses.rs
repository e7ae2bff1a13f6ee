use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::dual::D4;
use super::{BBox, EPS};
use crate::{Error, Result};

pub const FOCAL_ALPHA: f64 = 0.25;
pub const FOCAL_GAMMA: f64 = 2.0;

/// Loss value and its gradient with respect to the predicted box corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossValue {
    pub value: f64,
    pub grad_pred: [f64; 4],
}

impl LossValue {
    fn from_dual(d: D4) -> Self {
        Self {
            value: d.v,
            grad_pred: d.g,
        }
    }
}

/// Loss on a single scalar input (probability or logit) and its derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarLoss {
    pub value: f64,
    pub grad: f64,
}

/// Overlap and distance terms shared by the IoU-family losses.
struct Geometry {
    iou: D4,
    /// Squared distance between the box centres.
    rho2: D4,
    /// Enclosing box width and height.
    enc_w: D4,
    enc_h: D4,
    w: D4,
    h: D4,
    gt_w: f64,
    gt_h: f64,
}

impl Geometry {
    fn new(pred: &BBox, gt: &BBox) -> Self {
        let x1 = D4::var(pred.x1, 0);
        let y1 = D4::var(pred.y1, 1);
        let x2 = D4::var(pred.x2, 2);
        let y2 = D4::var(pred.y2, 3);
        let [gx1, gy1, gx2, gy2] = gt.to_array().map(D4::constant);

        let zero = D4::constant(0.0);
        let iw = (x2.min(gx2) - x1.max(gx1)).max(zero);
        let ih = (y2.min(gy2) - y1.max(gy1)).max(zero);
        let inter = iw * ih;
        let w = x2 - x1;
        let h = y2 - y1;
        let union = w * h + gt.area() - inter;
        let iou = inter / union.floor(EPS);

        let dx = (x1 + x2 - gx1 - gx2) * 0.5;
        let dy = (y1 + y2 - gy1 - gy2) * 0.5;
        let rho2 = dx.sqr() + dy.sqr();

        Self {
            iou,
            rho2,
            enc_w: x2.max(gx2) - x1.min(gx1),
            enc_h: y2.max(gy2) - y1.min(gy1),
            w,
            h,
            gt_w: gt.width(),
            gt_h: gt.height(),
        }
    }

    fn enclosing_diag2(&self) -> D4 {
        self.enc_w.sqr() + self.enc_h.sqr()
    }

    /// `rho^2 / c^2` with `c` the enclosing-box diagonal.
    fn distance_penalty(&self) -> D4 {
        self.rho2 / self.enclosing_diag2().floor(EPS)
    }

    /// Aspect-ratio consistency term `v` of CIoU.
    fn aspect_term(&self) -> D4 {
        let gt_angle = (self.gt_w / self.gt_h.max(EPS)).atan();
        let angle = (self.w / self.h.floor(EPS)).atan();
        (D4::constant(gt_angle) - angle).sqr() * (4.0 / (PI * PI))
    }
}

fn check_gt(gt: &BBox) -> Result<()> {
    if gt.width() > 0.0 && gt.height() > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "ground-truth box must have positive area, got {gt:?}"
        )))
    }
}

/// `1 - IoU` and its gradient.
pub fn iou_loss_grad(pred: &BBox, gt: &BBox) -> LossValue {
    LossValue::from_dual(1.0 - Geometry::new(pred, gt).iou)
}

fn ciou_dual(pred: &BBox, gt: &BBox, frozen_alpha: Option<f64>) -> D4 {
    let geo = Geometry::new(pred, gt);
    let v = geo.aspect_term();
    let alpha = frozen_alpha.unwrap_or_else(|| v.v / ((1.0 - geo.iou.v) + v.v).max(EPS));
    1.0 - geo.iou + geo.distance_penalty() + v * alpha
}

/// Complete-IoU loss `1 - IoU + rho^2/c^2 + alpha v`, with `alpha` held
/// constant when differentiating.
pub fn ciou_loss(pred: &BBox, gt: &BBox) -> Result<LossValue> {
    check_gt(gt)?;
    Ok(LossValue::from_dual(ciou_dual(pred, gt, None)))
}

/// CIoU value with the trade-off weight `alpha` fixed to a given constant.
///
/// This is the function whose derivative [`ciou_loss`] reports; gradient
/// checks perturb the box through this with `alpha` frozen at the base point.
pub fn ciou_value_frozen(pred: &BBox, gt: &BBox, alpha: f64) -> f64 {
    ciou_dual(pred, gt, Some(alpha)).v
}

/// The `alpha` weight CIoU uses at `(pred, gt)`.
pub fn ciou_alpha(pred: &BBox, gt: &BBox) -> f64 {
    let geo = Geometry::new(pred, gt);
    let v = geo.aspect_term().v;
    v / ((1.0 - geo.iou.v) + v).max(EPS)
}

/// Efficient-IoU loss: CIoU's aspect term replaced by separate width and
/// height penalties normalised by the enclosing box extents.
pub fn eiou_loss(pred: &BBox, gt: &BBox) -> Result<LossValue> {
    check_gt(gt)?;
    let geo = Geometry::new(pred, gt);
    let dw = (geo.w + -geo.gt_w).sqr() / geo.enc_w.sqr().floor(EPS);
    let dh = (geo.h + -geo.gt_h).sqr() / geo.enc_h.sqr().floor(EPS);
    let loss = 1.0 - geo.iou + geo.distance_penalty() + dw + dh;
    Ok(LossValue::from_dual(loss))
}

/// Running statistics and hyper-parameters of the Wise-IoU focusing mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WiouState {
    /// Exponential moving average of `1 - IoU`; `None` until the first observation.
    pub running_mean_iou_loss: Option<f64>,
    pub momentum: f64,
    pub alpha: f64,
    pub delta: f64,
}

impl Default for WiouState {
    fn default() -> Self {
        Self {
            running_mean_iou_loss: None,
            momentum: 0.99,
            alpha: 1.9,
            delta: 3.0,
        }
    }
}

impl WiouState {
    pub fn new(momentum: f64, alpha: f64, delta: f64) -> Result<Self> {
        if !(0.0 < momentum && momentum < 1.0) {
            return Err(Error::invalid(format!(
                "momentum must be in (0,1), got {momentum}"
            )));
        }
        if !(alpha > 0.0 && delta > 0.0) {
            return Err(Error::invalid("WIoU alpha and delta must be positive"));
        }
        Ok(Self {
            running_mean_iou_loss: None,
            momentum,
            alpha,
            delta,
        })
    }

    pub fn with_mean(mut self, mean: f64) -> Result<Self> {
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::invalid(format!(
                "running mean must be positive, got {mean}"
            )));
        }
        self.running_mean_iou_loss = Some(mean);
        Ok(self)
    }

    /// Folds one IoU loss into the running mean; the first observation seeds it.
    pub fn observe(self, iou_loss: f64) -> Self {
        self.observe_batch(&[iou_loss])
    }

    /// Folds the mean of a batch of IoU losses into the running mean.
    pub fn observe_batch(mut self, iou_losses: &[f64]) -> Self {
        if iou_losses.is_empty() {
            return self;
        }
        let batch = iou_losses.iter().sum::<f64>() / iou_losses.len() as f64;
        let next = match self.running_mean_iou_loss {
            Some(m) => self.momentum * m + (1.0 - self.momentum) * batch,
            None => batch,
        };
        self.running_mean_iou_loss = Some(next.max(EPS));
        self
    }
}

/// Focusing coefficient `r = beta / (delta * alpha^(beta - delta))`.
pub fn wiou_focus(beta: f64, alpha: f64, delta: f64) -> f64 {
    beta / (delta * alpha.powf(beta - delta))
}

fn wiou_dual(pred: &BBox, gt: &BBox, diag2: f64, focus: f64) -> D4 {
    let geo = Geometry::new(pred, gt);
    let attention = (geo.rho2 * (1.0 / diag2.max(EPS))).exp();
    attention * (1.0 - geo.iou) * focus
}

/// Wise-IoU loss with dynamic focusing.
///
/// `R = exp(rho^2 / D^2)` scales the IoU loss; the outlierness
/// `beta = L_IoU / mean(L_IoU)` picks the focusing coefficient. `D^2` and
/// `beta` are constants for differentiation. The returned state has the
/// sample's IoU loss folded into its running mean.
pub fn wiou_loss(pred: &BBox, gt: &BBox, state: &WiouState) -> Result<(LossValue, WiouState)> {
    check_gt(gt)?;
    let mean = state
        .running_mean_iou_loss
        .ok_or_else(|| Error::invalid("WIoU state has no running mean yet"))?;
    let geo = Geometry::new(pred, gt);
    let iou_loss = 1.0 - geo.iou.v;
    let diag2 = geo.enclosing_diag2().v;
    let beta = iou_loss / mean;
    let focus = wiou_focus(beta, state.alpha, state.delta);
    let loss = wiou_dual(pred, gt, diag2, focus);
    Ok((LossValue::from_dual(loss), state.observe(iou_loss)))
}

/// WIoU value with the enclosing diagonal and the focusing coefficient fixed.
pub fn wiou_value_frozen(pred: &BBox, gt: &BBox, diag2: f64, focus: f64) -> f64 {
    wiou_dual(pred, gt, diag2, focus).v
}

/// The detached `(D^2, r)` pair WIoU uses at `(pred, gt)`.
pub fn wiou_constants(pred: &BBox, gt: &BBox, state: &WiouState) -> Option<(f64, f64)> {
    let mean = state.running_mean_iou_loss?;
    let geo = Geometry::new(pred, gt);
    let beta = (1.0 - geo.iou.v) / mean;
    Some((
        geo.enclosing_diag2().v,
        wiou_focus(beta, state.alpha, state.delta),
    ))
}

/// Binary focal loss on a probability; `grad` is `dL/dprob`.
pub fn focal_loss(prob: f64, target: bool, alpha: f64, gamma: f64) -> Result<ScalarLoss> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::invalid(format!(
            "focal loss needs a probability strictly inside (0,1), got {prob}"
        )));
    }
    if !(gamma >= 0.0) {
        return Err(Error::invalid(format!(
            "gamma must be non-negative, got {gamma}"
        )));
    }
    let (p_t, alpha_t, sign) = if target {
        (prob, alpha, 1.0)
    } else {
        (1.0 - prob, 1.0 - alpha, -1.0)
    };
    let q = 1.0 - p_t;
    let ln_p = p_t.ln();
    let value = -alpha_t * q.powf(gamma) * ln_p;
    let focusing = if gamma == 0.0 {
        0.0
    } else {
        gamma * q.powf(gamma - 1.0) * ln_p
    };
    let d_pt = alpha_t * (focusing - q.powf(gamma) / p_t);
    Ok(ScalarLoss {
        value,
        grad: sign * d_pt,
    })
}

/// Numerically stable binary cross-entropy on a logit; `grad` is `dL/dlogit`.
pub fn bce_with_logits(logit: f64, target: bool) -> ScalarLoss {
    let t = if target { 1.0 } else { 0.0 };
    ScalarLoss {
        value: logit.max(0.0) - logit * t + (-logit.abs()).exp().ln_1p(),
        grad: crate::tensor::sigmoid(logit) - t,
    }
}
