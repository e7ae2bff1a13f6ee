//! Value plus its partial derivatives with respect to the predicted box
//! `(x1, y1, x2, y2)`, propagated by the chain rule through each loss formula.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct D4 {
    pub v: f64,
    pub g: [f64; 4],
}

impl D4 {
    pub fn constant(v: f64) -> Self {
        Self { v, g: [0.0; 4] }
    }

    /// Coordinate `i` of the predicted box.
    pub fn var(v: f64, i: usize) -> Self {
        let mut g = [0.0; 4];
        g[i] = 1.0;
        Self { v, g }
    }

    fn blend(a: D4, b: D4, wa: f64, v: f64) -> D4 {
        let wb = 1.0 - wa;
        D4 {
            v,
            g: std::array::from_fn(|i| wa * a.g[i] + wb * b.g[i]),
        }
    }

    /// Minimum; on an exact tie the derivative is split evenly between the
    /// arguments, which is the midpoint of the two one-sided derivatives.
    pub fn min(self, o: D4) -> D4 {
        let w = if self.v < o.v {
            1.0
        } else if self.v > o.v {
            0.0
        } else {
            0.5
        };
        Self::blend(self, o, w, self.v.min(o.v))
    }

    pub fn max(self, o: D4) -> D4 {
        let w = if self.v > o.v {
            1.0
        } else if self.v < o.v {
            0.0
        } else {
            0.5
        };
        Self::blend(self, o, w, self.v.max(o.v))
    }

    /// Denominator guard: `max(self, eps)` with zero slope below the floor.
    pub fn floor(self, eps: f64) -> D4 {
        if self.v >= eps {
            self
        } else {
            D4::constant(eps)
        }
    }

    pub fn map(self, v: f64, slope: f64) -> D4 {
        D4 {
            v,
            g: self.g.map(|g| g * slope),
        }
    }

    pub fn sqr(self) -> D4 {
        self * self
    }

    pub fn atan(self) -> D4 {
        self.map(self.v.atan(), 1.0 / (1.0 + self.v * self.v))
    }

    pub fn exp(self) -> D4 {
        let e = self.v.exp();
        self.map(e, e)
    }
}

impl Add for D4 {
    type Output = D4;
    fn add(self, o: D4) -> D4 {
        D4 {
            v: self.v + o.v,
            g: std::array::from_fn(|i| self.g[i] + o.g[i]),
        }
    }
}

impl Sub for D4 {
    type Output = D4;
    fn sub(self, o: D4) -> D4 {
        D4 {
            v: self.v - o.v,
            g: std::array::from_fn(|i| self.g[i] - o.g[i]),
        }
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl Mul for D4 {
    type Output = D4;
    fn mul(self, o: D4) -> D4 {
        D4 {
            v: self.v * o.v,
            g: std::array::from_fn(|i| self.g[i] * o.v + self.v * o.g[i]),
        }
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl Div for D4 {
    type Output = D4;
    fn div(self, o: D4) -> D4 {
        let inv = 1.0 / o.v;
        D4 {
            v: self.v * inv,
            g: std::array::from_fn(|i| (self.g[i] - self.v * inv * o.g[i]) * inv),
        }
    }
}

impl Neg for D4 {
    type Output = D4;
    fn neg(self) -> D4 {
        self.map(-self.v, -1.0)
    }
}

impl Mul<f64> for D4 {
    type Output = D4;
    fn mul(self, s: f64) -> D4 {
        self.map(self.v * s, s)
    }
}

impl Add<f64> for D4 {
    type Output = D4;
    fn add(self, s: f64) -> D4 {
        D4 {
            v: self.v + s,
            g: self.g,
        }
    }
}

impl Sub<D4> for f64 {
    type Output = D4;
    fn sub(self, o: D4) -> D4 {
        -o + self
    }
}
