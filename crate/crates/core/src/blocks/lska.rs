//! Large separable kernel attention: two cascaded 1D depthwise branches, the
//! second dilated, combined by an elementwise product.

use rand::Rng;

use super::random_kernel;
use crate::tensor::{conv2d, conv2d_backward_input, elementwise, BinaryOp, ConvSpec, Tensor};
use crate::{Error, Result};

pub const DEFAULT_KERNEL: usize = 7;
pub const DEFAULT_DILATION: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct LskaParams {
    /// `1 x k` depthwise.
    pub dw_h: ConvSpec,
    /// `k x 1` depthwise.
    pub dw_v: ConvSpec,
    /// `1 x k` depthwise, dilated.
    pub dwd_h: ConvSpec,
    /// `k x 1` depthwise, dilated.
    pub dwd_v: ConvSpec,
}

impl LskaParams {
    pub fn new(dw_h: ConvSpec, dw_v: ConvSpec, dwd_h: ConvSpec, dwd_v: ConvSpec) -> Result<Self> {
        let p = Self {
            dw_h,
            dw_v,
            dwd_h,
            dwd_v,
        };
        p.validate(None)?;
        Ok(p)
    }

    /// Random taps for `channels` channels, kernel length `k` and dilation `d`.
    pub fn random(channels: usize, k: usize, dilation: usize, rng: &mut impl Rng) -> Result<Self> {
        let scale = 1.0 / (k as f64).sqrt();
        let mut dw = |kh, kw, d| {
            ConvSpec::depthwise_same(random_kernel(&[channels, 1, kh, kw], scale, rng), d)
        };
        let dw_h = dw(1, k, 1)?;
        let dw_v = dw(k, 1, 1)?;
        let dwd_h = dw(1, k, dilation)?;
        let dwd_v = dw(k, 1, dilation)?;
        Self::new(dw_h, dw_v, dwd_h, dwd_v)
    }

    /// Both branches reduce to the identity (centre tap 1, all others 0).
    pub fn identity(channels: usize, k: usize, dilation: usize) -> Result<Self> {
        let delta = |kh: usize, kw: usize, d| {
            let centre = (kh / 2) * kw + kw / 2;
            let kernel = Tensor::from_fn(&[channels, 1, kh, kw], |i| {
                if i % (kh * kw) == centre {
                    1.0
                } else {
                    0.0
                }
            });
            ConvSpec::depthwise_same(kernel, d)
        };
        Self::new(
            delta(1, k, 1)?,
            delta(k, 1, 1)?,
            delta(1, k, dilation)?,
            delta(k, 1, dilation)?,
        )
    }

    fn specs(&self) -> [(&'static str, &ConvSpec); 4] {
        [
            ("dw_h", &self.dw_h),
            ("dw_v", &self.dw_v),
            ("dwd_h", &self.dwd_h),
            ("dwd_v", &self.dwd_v),
        ]
    }

    fn validate(&self, channels: Option<usize>) -> Result<()> {
        let c = channels.unwrap_or_else(|| self.dw_h.out_channels());
        for (name, spec) in self.specs() {
            if !spec.is_depthwise() {
                return Err(Error::invalid(format!(
                    "{name} is not a depthwise convolution"
                )));
            }
            if spec.out_channels() != c {
                return Err(Error::shape(
                    format!("{name} channels"),
                    c,
                    spec.out_channels(),
                ));
            }
            if spec.stride != 1 {
                return Err(Error::invalid(format!("{name} must have stride 1")));
            }
            let (kh, kw) = spec.kernel_size();
            let d = spec.dilation;
            if 2 * spec.padding.0 != d * (kh - 1) || 2 * spec.padding.1 != d * (kw - 1) {
                return Err(Error::invalid(format!(
                    "{name} does not preserve the spatial extent"
                )));
            }
        }
        Ok(())
    }
}

struct Branches {
    a_mid: Tensor,
    a: Tensor,
    b_mid: Tensor,
    b: Tensor,
}

fn branches(x: &Tensor, p: &LskaParams) -> Result<Branches> {
    let (_, c, _, _) = x.dims4()?;
    p.validate(Some(c))?;
    let a_mid = conv2d(x, &p.dw_h)?;
    let a = conv2d(&a_mid, &p.dw_v)?;
    let b_mid = conv2d(x, &p.dwd_h)?;
    let b = conv2d(&b_mid, &p.dwd_v)?;
    Ok(Branches { a_mid, a, b_mid, b })
}

/// `dw_v(dw_h(x)) * dwd_v(dwd_h(x))`, same shape as `x`.
pub fn lska(x: &Tensor, p: &LskaParams) -> Result<Tensor> {
    let br = branches(x, p)?;
    elementwise(&br.a, &br.b, BinaryOp::Mul)
}

pub fn lska_backward(x: &Tensor, p: &LskaParams, grad: &Tensor) -> Result<Tensor> {
    let br = branches(x, p)?;
    grad.expect_same_shape(&br.a)?;
    let d_a = elementwise(grad, &br.b, BinaryOp::Mul)?;
    let d_b = elementwise(grad, &br.a, BinaryOp::Mul)?;
    let d_a_mid = conv2d_backward_input(&d_a, br.a_mid.shape(), &p.dw_v)?;
    let d_b_mid = conv2d_backward_input(&d_b, br.b_mid.shape(), &p.dwd_v)?;
    let mut dx = conv2d_backward_input(&d_a_mid, x.shape(), &p.dw_h)?;
    dx.add_scaled(&conv2d_backward_input(&d_b_mid, x.shape(), &p.dwd_h)?, 1.0)?;
    Ok(dx)
}
