//! Minimal dense tensor kernel.
//!
//! Only the operations the detection blocks need are provided, each paired with
//! the backward function used by the blocks' hand-written gradients. Values are
//! stored as `f64` in row-major order; feature maps use `(N, C, H, W)` and raw
//! images use `(H, W, C)`.

mod conv;
mod finite_diff;

pub use conv::{conv2d, conv2d_backward_input, ConvSpec};
pub use finite_diff::{finite_diff_grad, grad_relative_error};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::invalid(format!(
                "tensor extents must be positive, got {shape:?}"
            )));
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::shape("data length", expected, data.len()));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        let len: usize = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..len).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Interprets the tensor as `(N, C, H, W)`.
    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match *self.shape.as_slice() {
            [n, c, h, w] => Ok((n, c, h, w)),
            _ => Err(Error::shape("rank", 4, self.shape.len())),
        }
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::new(shape.to_vec(), self.data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Inner product with a tensor of identical shape.
    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        self.expect_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// `self += factor * other`, shapes must match exactly.
    pub fn add_scaled(&mut self, other: &Tensor, factor: f64) -> Result<()> {
        self.expect_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
        Ok(())
    }

    pub(crate) fn expect_same_shape(&self, other: &Tensor) -> Result<()> {
        if self.shape.len() != other.shape.len() {
            return Err(Error::shape("rank", self.shape.len(), other.shape.len()));
        }
        for (axis, (&a, &b)) in self.shape.iter().zip(&other.shape).enumerate() {
            if a != b {
                return Err(Error::shape(format!("axis {axis}"), a, b));
            }
        }
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn at4(&self, n: usize, c: usize, h: usize, w: usize) -> f64 {
        let s = &self.shape;
        self.data[((n * s[1] + c) * s[2] + h) * s[3] + w]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolAxis {
    /// Mean over width: `(N, C, H, 1)`.
    Horizontal,
    /// Mean over height: `(N, C, 1, W)`.
    Vertical,
}

/// Mean taken relative to the first element, which is exact when all
/// values are equal.
pub fn anchored_mean(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut it = values.clone();
    let Some(first) = it.next() else {
        return f64::NAN;
    };
    let (n, dev) = values.fold((0usize, 0.0), |(n, s), v| (n + 1, s + (v - first)));
    first + dev / n as f64
}

pub fn directional_pool(x: &Tensor, axis: PoolAxis) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    match axis {
        PoolAxis::Horizontal => {
            let mut out = Tensor::zeros(&[n, c, h, 1]);
            for (row, dst) in x.data.chunks(w).zip(out.data.iter_mut()) {
                *dst = anchored_mean(row.iter().copied());
            }
            Ok(out)
        }
        PoolAxis::Vertical => {
            let mut out = Tensor::zeros(&[n, c, 1, w]);
            for (plane, dst) in x.data.chunks(h * w).zip(out.data.chunks_mut(w)) {
                for (j, d) in dst.iter_mut().enumerate() {
                    *d = anchored_mean((0..h).map(|i| plane[i * w + j]));
                }
            }
            Ok(out)
        }
    }
}

/// Spreads a pooled gradient back over the pooled axis.
pub fn directional_pool_backward(
    grad: &Tensor,
    input_shape: &[usize],
    axis: PoolAxis,
) -> Result<Tensor> {
    let &[n, c, h, w] = input_shape else {
        return Err(Error::shape("rank", 4, input_shape.len()));
    };
    let expected = match axis {
        PoolAxis::Horizontal => [n, c, h, 1],
        PoolAxis::Vertical => [n, c, 1, w],
    };
    grad.expect_same_shape(&Tensor::zeros(&expected))?;
    let mut out = Tensor::zeros(input_shape);
    for nc in 0..n * c {
        for i in 0..h {
            for j in 0..w {
                out.data[(nc * h + i) * w + j] = match axis {
                    PoolAxis::Horizontal => grad.data[nc * h + i] / w as f64,
                    PoolAxis::Vertical => grad.data[nc * w + j] / h as f64,
                };
            }
        }
    }
    Ok(out)
}

#[inline]
fn nearest_source(dst: usize, src_len: usize, dst_len: usize) -> usize {
    ((dst * src_len) / dst_len).min(src_len - 1)
}

/// Nearest-neighbour resize of the two trailing spatial axes.
///
/// Destination index `d` reads source index `floor(d * src / dst)`, so an
/// integer upscale by `k` replicates every cell into a `k x k` block.
pub fn resize_nearest(x: &Tensor, target_h: usize, target_w: usize) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    if target_h == 0 || target_w == 0 {
        return Err(Error::invalid(format!(
            "resize target must be positive, got {target_h}x{target_w}"
        )));
    }
    let rows: Vec<usize> = (0..target_h)
        .map(|i| nearest_source(i, h, target_h))
        .collect();
    let cols: Vec<usize> = (0..target_w)
        .map(|j| nearest_source(j, w, target_w))
        .collect();
    let mut out = Tensor::zeros(&[n, c, target_h, target_w]);
    for (src, dst) in x
        .data
        .chunks(h * w)
        .zip(out.data.chunks_mut(target_h * target_w))
    {
        for (i, &si) in rows.iter().enumerate() {
            for (j, &sj) in cols.iter().enumerate() {
                dst[i * target_w + j] = src[si * w + sj];
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`resize_nearest`]: every output gradient is added to the cell it was read from.
pub fn resize_nearest_backward(grad: &Tensor, input_shape: &[usize]) -> Result<Tensor> {
    let (n, c, th, tw) = grad.dims4()?;
    let &[n_in, c_in, h, w] = input_shape else {
        return Err(Error::shape("rank", 4, input_shape.len()));
    };
    if n != n_in {
        return Err(Error::shape("batch", n_in, n));
    }
    if c != c_in {
        return Err(Error::shape("channels", c_in, c));
    }
    let mut out = Tensor::zeros(input_shape);
    for (g, dst) in grad.data.chunks(th * tw).zip(out.data.chunks_mut(h * w)) {
        for i in 0..th {
            let si = nearest_source(i, h, th);
            for j in 0..tw {
                dst[si * w + nearest_source(j, w, tw)] += g[i * tw + j];
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Relu,
}

/// Logistic function, kept strictly inside the open unit interval.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

pub fn activation(x: &Tensor, kind: Activation) -> Tensor {
    match kind {
        Activation::Sigmoid => x.map(sigmoid),
        Activation::Relu => x.map(|v| v.max(0.0)),
    }
}

/// Gradient of [`activation`] given the forward input `x`.
pub fn activation_backward(grad: &Tensor, x: &Tensor, kind: Activation) -> Result<Tensor> {
    grad.expect_same_shape(x)?;
    let data = grad
        .data
        .iter()
        .zip(&x.data)
        .map(|(&g, &v)| match kind {
            Activation::Sigmoid => {
                let s = sigmoid(v);
                g * s * (1.0 - s)
            }
            Activation::Relu if v > 0.0 => g,
            Activation::Relu => 0.0,
        })
        .collect();
    Ok(Tensor {
        shape: x.shape.clone(),
        data,
    })
}

pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::invalid("softmax of an empty sequence"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Vector-Jacobian product of softmax: `dL/dlogits` from `dL/dprobs`.
pub fn softmax_backward(probs: &[f64], grad: &[f64]) -> Vec<f64> {
    let inner: f64 = probs.iter().zip(grad).map(|(p, g)| p * g).sum();
    probs
        .iter()
        .zip(grad)
        .map(|(p, g)| p * (g - inner))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Mul,
}

fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    if a.len() != b.len() {
        return Err(Error::shape("rank", a.len(), b.len()));
    }
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(axis, (&x, &y))| match (x, y) {
            _ if x == y => Ok(x),
            (1, _) => Ok(y),
            (_, 1) => Ok(x),
            _ => Err(Error::shape(format!("broadcast axis {axis}"), x, y)),
        })
        .collect()
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Flat source index for every output element, with singleton axes pinned at 0.
fn broadcast_indices(src: &[usize], out: &[usize]) -> Vec<usize> {
    let src_strides = strides(src);
    let out_strides = strides(out);
    let total: usize = out.iter().product();
    (0..total)
        .map(|flat| {
            let mut idx = 0;
            let mut rem = flat;
            for axis in 0..out.len() {
                let coord = rem / out_strides[axis];
                rem %= out_strides[axis];
                if src[axis] != 1 {
                    idx += coord * src_strides[axis];
                }
            }
            idx
        })
        .collect()
}

/// Elementwise add/multiply with same-rank singleton broadcasting.
pub fn elementwise(a: &Tensor, b: &Tensor, op: BinaryOp) -> Result<Tensor> {
    let shape = broadcast_shape(&a.shape, &b.shape)?;
    let f = |x: f64, y: f64| match op {
        BinaryOp::Add => x + y,
        BinaryOp::Mul => x * y,
    };
    let data = if a.shape == b.shape {
        a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect()
    } else {
        let ia = broadcast_indices(&a.shape, &shape);
        let ib = broadcast_indices(&b.shape, &shape);
        ia.iter()
            .zip(&ib)
            .map(|(&i, &j)| f(a.data[i], b.data[j]))
            .collect()
    };
    Ok(Tensor { shape, data })
}

/// Sums a broadcast gradient back down to `shape` (the adjoint of broadcasting).
pub fn reduce_to_shape(grad: &Tensor, shape: &[usize]) -> Result<Tensor> {
    let out_shape = broadcast_shape(shape, &grad.shape)?;
    if out_shape != grad.shape {
        return Err(Error::invalid(format!(
            "cannot reduce {:?} to {shape:?}",
            grad.shape
        )));
    }
    let mut out = Tensor::zeros(shape);
    for (g, &i) in grad.data.iter().zip(&broadcast_indices(shape, &grad.shape)) {
        out.data[i] += g;
    }
    Ok(out)
}
