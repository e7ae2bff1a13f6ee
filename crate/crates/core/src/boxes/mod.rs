//! Box geometry and the IoU-family regression losses.

mod dual;
mod losses;

pub use losses::{
    bce_with_logits, ciou_alpha, ciou_loss, ciou_value_frozen, eiou_loss, focal_loss,
    iou_loss_grad, wiou_constants, wiou_focus, wiou_loss, wiou_value_frozen, LossValue, ScalarLoss,
    WiouState, FOCAL_ALPHA, FOCAL_GAMMA,
};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Guard for every denominator in the box math.
pub const EPS: f64 = 1e-9;

/// Axis-aligned box in absolute pixel corner form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let b = Self { x1, y1, x2, y2 };
        if ![x1, y1, x2, y2].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(format!("non-finite box {b:?}")));
        }
        if x2 < x1 || y2 < y1 {
            return Err(Error::invalid(format!("inverted box {b:?}")));
        }
        Ok(b)
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    pub fn from_array(v: [f64; 4]) -> Result<Self> {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let h = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        w * h
    }

    /// Smallest box containing both.
    pub fn enclosing(&self, other: &BBox) -> BBox {
        BBox {
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
            x2: self.x2.max(other.x2),
            y2: self.y2.max(other.y2),
        }
    }

    /// Intersection with `[0, w] x [0, h]`; may collapse to zero area.
    pub fn clip(&self, w: f64, h: f64) -> BBox {
        let x1 = self.x1.clamp(0.0, w);
        let y1 = self.y1.clamp(0.0, h);
        BBox {
            x1,
            y1,
            x2: self.x2.clamp(x1, w),
            y2: self.y2.clamp(y1, h),
        }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> BBox {
        BBox {
            x1: self.x1 + dx,
            y1: self.y1 + dy,
            x2: self.x2 + dx,
            y2: self.y2 + dy,
        }
    }

    pub fn scale(&self, s: f64) -> BBox {
        BBox {
            x1: self.x1 * s,
            y1: self.y1 * s,
            x2: self.x2 * s,
            y2: self.y2 * s,
        }
    }

    pub fn is_within(&self, w: f64, h: f64) -> bool {
        0.0 <= self.x1
            && self.x1 <= self.x2
            && self.x2 <= w
            && 0.0 <= self.y1
            && self.y1 <= self.y2
            && self.y2 <= h
    }
}

/// Intersection over union. Zero-area boxes give 0, even against themselves.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    inter / union.max(EPS)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn iou_examples() {
        let a = bb(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bb(5.0, 5.0, 6.0, 6.0)), 0.0);
        assert!((iou(&a, &bb(1.0, 1.0, 3.0, 3.0)) - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_boxes() {
        let p = bb(1.0, 1.0, 1.0, 1.0);
        assert_eq!(iou(&p, &p), 0.0);
        let line = bb(0.0, 0.0, 4.0, 0.0);
        assert_eq!(iou(&line, &bb(0.0, 0.0, 4.0, 4.0)), 0.0);
    }

    #[test]
    fn new_validates() {
        assert!(BBox::new(2.0, 0.0, 1.0, 1.0).is_err());
        assert!(BBox::new(0.0, 0.0, f64::NAN, 1.0).is_err());
        assert_eq!(
            BBox::from_center(5.0, 5.0, 2.0, 4.0).unwrap(),
            bb(4.0, 3.0, 6.0, 7.0)
        );
    }

    #[test]
    fn clip_collapses_outside_boxes() {
        let b = bb(-10.0, -10.0, -5.0, 3.0).clip(8.0, 8.0);
        assert_eq!(b.width(), 0.0);
        assert!(b.is_within(8.0, 8.0));
    }
}
