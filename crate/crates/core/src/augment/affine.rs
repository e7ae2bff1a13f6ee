use crate::boxes::BBox;
use crate::{Error, Result};

/// 2D affine map `(x, y) -> (a x + b y + tx, c x + d y + ty)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
        tx: 0.0,
        ty: 0.0,
    };

    /// Builds from the row-major `2 x 3` matrix.
    pub fn from_rows(m: [[f64; 3]; 2]) -> Self {
        Self {
            a: m[0][0],
            b: m[0][1],
            tx: m[0][2],
            c: m[1][0],
            d: m[1][1],
            ty: m[1][2],
        }
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self {
            tx: dx,
            ty: dy,
            ..Self::IDENTITY
        }
    }

    pub fn scaling(s: f64) -> Self {
        Self {
            a: s,
            d: s,
            ..Self::IDENTITY
        }
    }

    /// Counter-clockwise rotation in image coordinates (y down) about the origin.
    pub fn rotation_deg(deg: f64) -> Self {
        if deg == 0.0 {
            return Self::IDENTITY;
        }
        let (s, c) = deg.to_radians().sin_cos();
        Self {
            a: c,
            b: s,
            c: -s,
            d: c,
            tx: 0.0,
            ty: 0.0,
        }
    }

    /// `self` applied after `first`.
    pub fn after(&self, first: &Affine) -> Affine {
        Affine {
            a: self.a * first.a + self.b * first.c,
            b: self.a * first.b + self.b * first.d,
            c: self.c * first.a + self.d * first.c,
            d: self.c * first.b + self.d * first.d,
            tx: self.a * first.tx + self.b * first.ty + self.tx,
            ty: self.c * first.tx + self.d * first.ty + self.ty,
        }
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.a * x + self.b * y + self.tx,
            self.c * x + self.d * y + self.ty,
        )
    }

    pub fn inverse(&self) -> Result<Affine> {
        let det = self.determinant();
        if det.abs() < 1e-12 || !det.is_finite() {
            return Err(Error::invalid(format!(
                "affine linear part is singular (determinant {det})"
            )));
        }
        let (a, b, c, d) = (self.d / det, -self.b / det, -self.c / det, self.a / det);
        Ok(Affine {
            a,
            b,
            c,
            d,
            tx: -(a * self.tx + b * self.ty),
            ty: -(c * self.tx + d * self.ty),
        })
    }
}

/// Maps each box to the axis-aligned hull of its four transformed corners,
/// clipped to `[0, canvas_w] x [0, canvas_h]`.
///
/// The flag is false when less than `min_visible_frac` of the hull area
/// survives clipping. A zero-area hull survives only if clipping left it
/// untouched.
pub fn transform_boxes(
    boxes: &[BBox],
    affine: &Affine,
    canvas_w: f64,
    canvas_h: f64,
    min_visible_frac: f64,
) -> Result<Vec<(BBox, bool)>> {
    affine.inverse()?;
    Ok(boxes
        .iter()
        .map(|b| {
            let corners = [(b.x1, b.y1), (b.x2, b.y1), (b.x1, b.y2), (b.x2, b.y2)]
                .map(|(x, y)| affine.apply(x, y));
            let hull = BBox {
                x1: corners.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
                y1: corners.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
                x2: corners
                    .iter()
                    .map(|p| p.0)
                    .fold(f64::NEG_INFINITY, f64::max),
                y2: corners
                    .iter()
                    .map(|p| p.1)
                    .fold(f64::NEG_INFINITY, f64::max),
            };
            let clipped = hull.clip(canvas_w, canvas_h);
            let area = hull.area();
            let kept = if area > 0.0 {
                clipped.area() / area >= min_visible_frac
            } else {
                clipped == hull
            };
            (clipped, kept)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn identity_keeps_boxes() {
        let boxes = [bb(1.0, 2.0, 30.0, 40.0), bb(0.0, 0.0, 64.0, 64.0)];
        let out = transform_boxes(&boxes, &Affine::IDENTITY, 64.0, 64.0, 0.25).unwrap();
        for ((b, kept), orig) in out.iter().zip(&boxes) {
            assert!(kept);
            assert_eq!(b, orig);
        }
    }

    #[test]
    fn translation() {
        let out = transform_boxes(
            &[bb(10.0, 10.0, 50.0, 50.0)],
            &Affine::translation(320.0, 320.0),
            640.0,
            640.0,
            0.25,
        )
        .unwrap();
        assert_eq!(out[0], (bb(330.0, 330.0, 370.0, 370.0), true));
    }

    #[test]
    fn rotated_unit_square_hull() {
        let about_centre = Affine::translation(5.5, 5.5)
            .after(&Affine::rotation_deg(45.0))
            .after(&Affine::translation(-5.5, -5.5));
        let out =
            transform_boxes(&[bb(5.0, 5.0, 6.0, 6.0)], &about_centre, 20.0, 20.0, 0.25).unwrap();
        let hull = out[0].0;
        assert!((hull.width() - 2f64.sqrt()).abs() < 1e-12);
        assert!((hull.area() - 2.0).abs() < 1e-12);
        // Point-sampling oracle: the rotated square's extreme corners.
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..=100 {
            let t = 5.0 + i as f64 / 100.0;
            for (x, y) in [(t, 5.0), (t, 6.0), (5.0, t), (6.0, t)] {
                let (px, _) = about_centre.apply(x, y);
                lo = lo.min(px);
                hi = hi.max(px);
            }
        }
        assert!((hull.x1 - lo).abs() < 1e-12 && (hull.x2 - hi).abs() < 1e-12);
    }

    #[test]
    fn clipping_and_dropping() {
        let b = [bb(-30.0, 0.0, 10.0, 10.0), bb(-5.0, 0.0, 15.0, 10.0)];
        let out = transform_boxes(&b, &Affine::IDENTITY, 100.0, 100.0, 0.5).unwrap();
        assert_eq!(out[0], (bb(0.0, 0.0, 10.0, 10.0), false));
        assert_eq!(out[1], (bb(0.0, 0.0, 15.0, 10.0), true));
    }

    #[test]
    fn singular_is_an_error() {
        let flat = Affine::from_rows([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0]]);
        assert!(transform_boxes(&[], &flat, 10.0, 10.0, 0.25).is_err());
        assert!(flat.inverse().is_err());
    }

    #[test]
    fn inverse_round_trips() {
        let m = Affine::translation(3.0, -2.0)
            .after(&Affine::rotation_deg(-12.0))
            .after(&Affine::scaling(1.7));
        let inv = m.inverse().unwrap();
        let (x, y) = inv.apply(m.apply(4.2, -1.1).0, m.apply(4.2, -1.1).1);
        assert!((x - 4.2).abs() < 1e-12 && (y + 1.1).abs() < 1e-12);
    }
}
