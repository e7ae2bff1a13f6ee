//! Detection-network blocks as standalone forward/backward pairs.
//!
//! Each block is a pure function of `(input, params)` with a hand-written
//! gradient with respect to its input.

mod bifpn;
mod coord_attention;
mod lska;
mod odconv;

pub use bifpn::{bifpn_fuse, bifpn_fuse_backward, bifpn_layer4, BifpnNodeParams};
pub use coord_attention::{
    coordinate_attention, coordinate_attention_backward, coordinate_attention_forward, CaForward,
    CaParams, ChannelNorm,
};
pub use lska::{
    lska, lska_backward, LskaParams, DEFAULT_DILATION as LSKA_DILATION,
    DEFAULT_KERNEL as LSKA_KERNEL,
};
pub use odconv::{odconv, odconv_attention, odconv_backward, OdconvParams};

use rand::Rng;

use crate::tensor::{ConvSpec, Tensor};

/// Kernel with entries uniform in `[-scale, scale]`.
pub(crate) fn random_kernel(shape: &[usize], scale: f64, rng: &mut impl Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-scale..=scale))
}

pub(crate) fn random_conv(
    out_ch: usize,
    in_ch: usize,
    kh: usize,
    kw: usize,
    rng: &mut impl Rng,
) -> ConvSpec {
    let scale = 1.0 / ((in_ch * kh * kw) as f64).sqrt();
    let kernel = random_kernel(&[out_ch, in_ch, kh, kw], scale, rng);
    let bias = (0..out_ch).map(|_| rng.random_range(-0.1..=0.1)).collect();
    ConvSpec::new(kernel, bias).expect("kernel and bias sizes agree")
}
