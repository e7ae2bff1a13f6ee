//! Coordinate Attention.
//!
//! Row and column means are encoded through a shared `1 x 1` bottleneck, then
//! expanded into a per-row gate `g_h` and a per-column gate `g_w`;
//! `y(c, i, j) = x(c, i, j) * g_h(c, i) * g_w(c, j)`.

use rand::Rng;

use super::random_conv;
use crate::tensor::{
    activation, activation_backward, conv2d, conv2d_backward_input, directional_pool,
    directional_pool_backward, elementwise, reduce_to_shape, Activation, BinaryOp, ConvSpec,
    PoolAxis, Tensor,
};
use crate::{Error, Result};

/// Inference-mode batch normalisation with stored statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub eps: f64,
}

impl ChannelNorm {
    /// `gamma = 1, beta = 0, mean = 0, var = 1, eps = 0`: maps every value to itself.
    pub fn identity(channels: usize) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
            eps: 0.0,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn scale(&self, c: usize) -> f64 {
        self.gamma[c] / (self.var[c] + self.eps).sqrt()
    }

    fn validate(&self) -> Result<()> {
        let c = self.channels();
        for (name, len) in [
            ("norm beta", self.beta.len()),
            ("norm mean", self.mean.len()),
            ("norm variance", self.var.len()),
        ] {
            if len != c {
                return Err(Error::shape(name, c, len));
            }
        }
        if self.var.iter().any(|&v| !(v + self.eps > 0.0)) {
            return Err(Error::invalid(
                "normalisation variance + eps must be positive",
            ));
        }
        Ok(())
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (_, c, h, w) = x.dims4()?;
        if c != self.channels() {
            return Err(Error::shape("norm channels", self.channels(), c));
        }
        let mut out = x.clone();
        for (i, plane) in out.data_mut().chunks_mut(h * w).enumerate() {
            let ch = i % c;
            let (s, m, b) = (self.scale(ch), self.mean[ch], self.beta[ch]);
            plane.iter_mut().for_each(|v| *v = s * (*v - m) + b);
        }
        Ok(out)
    }

    fn backward(&self, grad: &Tensor) -> Result<Tensor> {
        let (_, c, h, w) = grad.dims4()?;
        let mut out = grad.clone();
        for (i, plane) in out.data_mut().chunks_mut(h * w).enumerate() {
            let s = self.scale(i % c);
            plane.iter_mut().for_each(|v| *v *= s);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaParams {
    /// Shared `1 x 1` trunk, `C -> C / ratio`.
    pub reduce: ConvSpec,
    pub norm: ChannelNorm,
    /// `1 x 1`, `C / ratio -> C`, produces the row gate.
    pub expand_h: ConvSpec,
    /// `1 x 1`, `C / ratio -> C`, produces the column gate.
    pub expand_w: ConvSpec,
    pub ratio: usize,
}

impl CaParams {
    /// All convolution weights and biases zero with identity normalisation,
    /// which makes both gates exactly 0.5.
    pub fn zeros(channels: usize, ratio: usize) -> Result<Self> {
        let mid = Self::mid_channels(channels, ratio)?;
        let zero = |o, i| ConvSpec::new(Tensor::zeros(&[o, i, 1, 1]), vec![0.0; o]);
        Ok(Self {
            reduce: zero(mid, channels)?,
            norm: ChannelNorm::identity(mid),
            expand_h: zero(channels, mid)?,
            expand_w: zero(channels, mid)?,
            ratio,
        })
    }

    pub fn random(channels: usize, ratio: usize, rng: &mut impl Rng) -> Result<Self> {
        let mid = Self::mid_channels(channels, ratio)?;
        let norm = ChannelNorm {
            gamma: (0..mid).map(|_| rng.random_range(0.5..1.5)).collect(),
            beta: (0..mid).map(|_| rng.random_range(-0.1..0.1)).collect(),
            mean: (0..mid).map(|_| rng.random_range(-0.1..0.1)).collect(),
            var: (0..mid).map(|_| rng.random_range(0.5..1.5)).collect(),
            eps: 1e-5,
        };
        Ok(Self {
            reduce: random_conv(mid, channels, 1, 1, rng),
            norm,
            expand_h: random_conv(channels, mid, 1, 1, rng),
            expand_w: random_conv(channels, mid, 1, 1, rng),
            ratio,
        })
    }

    fn mid_channels(channels: usize, ratio: usize) -> Result<usize> {
        if ratio == 0 || !channels.is_multiple_of(ratio) {
            return Err(Error::invalid(format!(
                "reduction ratio {ratio} must divide the channel count {channels}"
            )));
        }
        Ok(channels / ratio)
    }

    fn validate(&self, channels: usize) -> Result<()> {
        let mid = Self::mid_channels(channels, self.ratio)?;
        self.norm.validate()?;
        let checks = [
            ("reduce", &self.reduce, channels, mid),
            ("expand_h", &self.expand_h, mid, channels),
            ("expand_w", &self.expand_w, mid, channels),
        ];
        for (name, spec, cin, cout) in checks {
            if spec.kernel_size() != (1, 1) || spec.groups != 1 || spec.stride != 1 {
                return Err(Error::invalid(format!(
                    "{name} must be a plain 1x1 convolution"
                )));
            }
            if spec.in_channels() != cin {
                return Err(Error::shape(
                    format!("{name} input channels"),
                    cin,
                    spec.in_channels(),
                ));
            }
            if spec.out_channels() != cout {
                return Err(Error::shape(
                    format!("{name} output channels"),
                    cout,
                    spec.out_channels(),
                ));
            }
        }
        if self.norm.channels() != mid {
            return Err(Error::shape("norm channels", mid, self.norm.channels()));
        }
        Ok(())
    }
}

/// Forward result with the intermediates needed for the backward pass.
#[derive(Debug, Clone)]
pub struct CaForward {
    pub output: Tensor,
    /// Row gate, `(N, C, H, 1)`, strictly inside `(0, 1)`.
    pub gate_h: Tensor,
    /// Column gate, `(N, C, 1, W)`, strictly inside `(0, 1)`.
    pub gate_w: Tensor,
    /// Normalised bottleneck before ReLU, `(N, C / ratio, H + W, 1)`.
    pub pre_activation: Tensor,
}

/// Stacks `(N, C, H, 1)` and `(N, C, 1, W)` into `(N, C, H + W, 1)`.
fn concat_pooled(zh: &Tensor, zw: &Tensor) -> Result<Tensor> {
    let (n, c, h, _) = zh.dims4()?;
    let w = zw.shape()[3];
    let mut data = Vec::with_capacity(n * c * (h + w));
    for (rows, cols) in zh.data().chunks(h).zip(zw.data().chunks(w)) {
        data.extend_from_slice(rows);
        data.extend_from_slice(cols);
    }
    Tensor::new(vec![n, c, h + w, 1], data)
}

/// Inverse of [`concat_pooled`].
fn split_pooled(t: &Tensor, h: usize, w: usize) -> Result<(Tensor, Tensor)> {
    let (n, c, _, _) = t.dims4()?;
    let mut rows = Vec::with_capacity(n * c * h);
    let mut cols = Vec::with_capacity(n * c * w);
    for chunk in t.data().chunks(h + w) {
        rows.extend_from_slice(&chunk[..h]);
        cols.extend_from_slice(&chunk[h..]);
    }
    Ok((
        Tensor::new(vec![n, c, h, 1], rows)?,
        Tensor::new(vec![n, c, 1, w], cols)?,
    ))
}

pub fn coordinate_attention_forward(x: &Tensor, p: &CaParams) -> Result<CaForward> {
    let (_, c, h, w) = x.dims4()?;
    p.validate(c)?;
    let zh = directional_pool(x, PoolAxis::Horizontal)?;
    let zw = directional_pool(x, PoolAxis::Vertical)?;
    let z = concat_pooled(&zh, &zw)?;
    let pre_activation = p.norm.forward(&conv2d(&z, &p.reduce)?)?;
    let f = activation(&pre_activation, Activation::Relu);
    let (fh, fw) = split_pooled(&f, h, w)?;
    let gate_h = activation(&conv2d(&fh, &p.expand_h)?, Activation::Sigmoid);
    let gate_w = activation(&conv2d(&fw, &p.expand_w)?, Activation::Sigmoid);
    let gates = elementwise(&gate_h, &gate_w, BinaryOp::Mul)?;
    let output = elementwise(x, &gates, BinaryOp::Mul)?;
    Ok(CaForward {
        output,
        gate_h,
        gate_w,
        pre_activation,
    })
}

pub fn coordinate_attention(x: &Tensor, p: &CaParams) -> Result<Tensor> {
    Ok(coordinate_attention_forward(x, p)?.output)
}

/// Gradient of the block output with respect to `x`, given `dL/doutput`.
pub fn coordinate_attention_backward(x: &Tensor, p: &CaParams, grad: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    let fwd = coordinate_attention_forward(x, p)?;
    grad.expect_same_shape(&fwd.output)?;
    let mid = c / p.ratio;

    let gates = elementwise(&fwd.gate_h, &fwd.gate_w, BinaryOp::Mul)?;
    let mut dx = elementwise(grad, &gates, BinaryOp::Mul)?;

    let gx = elementwise(grad, x, BinaryOp::Mul)?;
    let d_gate_h = reduce_to_shape(
        &elementwise(&gx, &fwd.gate_w, BinaryOp::Mul)?,
        &[n, c, h, 1],
    )?;
    let d_gate_w = reduce_to_shape(
        &elementwise(&gx, &fwd.gate_h, BinaryOp::Mul)?,
        &[n, c, 1, w],
    )?;
    let sig_slope = |g: &Tensor| g.map(|s| s * (1.0 - s));
    let d_ah = elementwise(&d_gate_h, &sig_slope(&fwd.gate_h), BinaryOp::Mul)?;
    let d_aw = elementwise(&d_gate_w, &sig_slope(&fwd.gate_w), BinaryOp::Mul)?;
    let d_fh = conv2d_backward_input(&d_ah, &[n, mid, h, 1], &p.expand_h)?;
    let d_fw = conv2d_backward_input(&d_aw, &[n, mid, 1, w], &p.expand_w)?;

    let d_f = concat_pooled(&d_fh, &d_fw)?;
    let d_pre = activation_backward(&d_f, &fwd.pre_activation, Activation::Relu)?;
    let d_reduced = p.norm.backward(&d_pre)?;
    let d_z = conv2d_backward_input(&d_reduced, &[n, c, h + w, 1], &p.reduce)?;
    let (d_zh, d_zw) = split_pooled(&d_z, h, w)?;
    dx.add_scaled(
        &directional_pool_backward(&d_zh, x.shape(), PoolAxis::Horizontal)?,
        1.0,
    )?;
    dx.add_scaled(
        &directional_pool_backward(&d_zw, x.shape(), PoolAxis::Vertical)?,
        1.0,
    )?;
    Ok(dx)
}
