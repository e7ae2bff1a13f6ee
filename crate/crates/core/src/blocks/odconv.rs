//! Kernel-wise dynamic convolution: `y = sum_k a_k conv_k(x)` where the
//! attention `a = softmax(W gap(x) + b)` is computed per sample.

use rand::Rng;

use super::random_conv;
use crate::tensor::{conv2d, conv2d_backward_input, softmax, softmax_backward, ConvSpec, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OdconvParams {
    /// Candidate kernels; identical geometry.
    pub kernels: Vec<ConvSpec>,
    /// Affine map from pooled channels to kernel logits, row-major `(K, C)`.
    pub attn_weight: Vec<f64>,
    pub attn_bias: Vec<f64>,
}

impl OdconvParams {
    pub fn new(kernels: Vec<ConvSpec>, attn_weight: Vec<f64>, attn_bias: Vec<f64>) -> Result<Self> {
        let p = Self {
            kernels,
            attn_weight,
            attn_bias,
        };
        p.validate()?;
        Ok(p)
    }

    /// `k` random `size x size` kernels with same padding.
    pub fn random(
        in_ch: usize,
        out_ch: usize,
        k: usize,
        size: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let kernels = (0..k)
            .map(|_| random_conv(out_ch, in_ch, size, size, rng).with_padding(size / 2, size / 2))
            .collect();
        let attn_weight = (0..k * in_ch)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let attn_bias = (0..k).map(|_| rng.random_range(-0.5..0.5)).collect();
        Self::new(kernels, attn_weight, attn_bias)
    }

    pub fn num_kernels(&self) -> usize {
        self.kernels.len()
    }

    fn in_channels(&self) -> usize {
        self.kernels[0].in_channels()
    }

    fn validate(&self) -> Result<()> {
        let first = self
            .kernels
            .first()
            .ok_or_else(|| Error::invalid("ODConv needs at least one kernel"))?;
        for (i, k) in self.kernels.iter().enumerate().skip(1) {
            if k.kernel.shape() != first.kernel.shape()
                || (k.stride, k.padding, k.dilation, k.groups)
                    != (first.stride, first.padding, first.dilation, first.groups)
            {
                return Err(Error::invalid(format!(
                    "kernel {i} geometry differs from kernel 0"
                )));
            }
        }
        let k = self.kernels.len();
        let c = first.in_channels();
        if self.attn_weight.len() != k * c {
            return Err(Error::shape(
                "attention weight",
                k * c,
                self.attn_weight.len(),
            ));
        }
        if self.attn_bias.len() != k {
            return Err(Error::shape("attention bias", k, self.attn_bias.len()));
        }
        Ok(())
    }

    /// Single convolution whose kernel and bias are the `a`-weighted sums.
    pub fn aggregate(&self, a: &[f64]) -> Result<ConvSpec> {
        self.validate()?;
        if a.len() != self.kernels.len() {
            return Err(Error::shape(
                "attention weights",
                self.kernels.len(),
                a.len(),
            ));
        }
        let mut spec = self.kernels[0].clone();
        let mut kernel = Tensor::zeros(spec.kernel.shape());
        let mut bias = vec![0.0; spec.bias.len()];
        for (k, &ak) in self.kernels.iter().zip(a) {
            kernel.add_scaled(&k.kernel, ak)?;
            for (b, kb) in bias.iter_mut().zip(&k.bias) {
                *b += ak * kb;
            }
        }
        spec.kernel = kernel;
        spec.bias = bias;
        Ok(spec)
    }
}

fn global_average_pool(x: &Tensor) -> Result<Vec<f64>> {
    let (_, _, h, w) = x.dims4()?;
    Ok(x.data()
        .chunks(h * w)
        .map(|p| p.iter().sum::<f64>() / (h * w) as f64)
        .collect())
}

fn logits(p: &OdconvParams, pooled: &[f64]) -> Vec<f64> {
    let c = pooled.len();
    p.attn_bias
        .iter()
        .enumerate()
        .map(|(k, b)| {
            b + (0..c)
                .map(|ci| p.attn_weight[k * c + ci] * pooled[ci])
                .sum::<f64>()
        })
        .collect()
}

/// Per-sample kernel attention weights, `N` rows of `K` values summing to one.
pub fn odconv_attention(x: &Tensor, p: &OdconvParams) -> Result<Vec<Vec<f64>>> {
    p.validate()?;
    let (_, c, _, _) = x.dims4()?;
    if c != p.in_channels() {
        return Err(Error::shape("input channels", p.in_channels(), c));
    }
    global_average_pool(x)?
        .chunks(c)
        .map(|pooled| softmax(&logits(p, pooled)))
        .collect()
}

fn sample(x: &Tensor, n: usize) -> Result<Tensor> {
    let (_, c, h, w) = x.dims4()?;
    let len = c * h * w;
    Tensor::new(vec![1, c, h, w], x.data()[n * len..(n + 1) * len].to_vec())
}

/// Per-kernel outputs `conv_k(x)` for every kernel.
fn branch_outputs(x: &Tensor, p: &OdconvParams) -> Result<Vec<Tensor>> {
    p.kernels.iter().map(|k| conv2d(x, k)).collect()
}

pub fn odconv(x: &Tensor, p: &OdconvParams) -> Result<Tensor> {
    let attn = odconv_attention(x, p)?;
    let branches = branch_outputs(x, p)?;
    let (n, f, oh, ow) = branches[0].dims4()?;
    let plane = f * oh * ow;
    let mut data = Vec::with_capacity(n * plane);
    for (b, a) in attn.iter().enumerate() {
        let range = b * plane..(b + 1) * plane;
        // First term assigned rather than accumulated so that K = 1 reproduces
        // the plain convolution bit for bit.
        let mut acc: Vec<f64> = branches[0].data()[range.clone()]
            .iter()
            .map(|v| a[0] * v)
            .collect();
        for (branch, ak) in branches.iter().zip(a).skip(1) {
            for (dst, v) in acc.iter_mut().zip(&branch.data()[range.clone()]) {
                *dst += ak * v;
            }
        }
        data.extend(acc);
    }
    Tensor::new(vec![n, f, oh, ow], data)
}

/// Gradient with respect to `x`, through both the convolutions and the
/// attention branch.
pub fn odconv_backward(x: &Tensor, p: &OdconvParams, grad: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    let attn = odconv_attention(x, p)?;
    let branches = branch_outputs(x, p)?;
    grad.expect_same_shape(&branches[0])?;
    let k = p.num_kernels();

    let mut dx = Tensor::zeros(x.shape());
    for (b, a) in attn.iter().enumerate().take(n) {
        let g = sample(grad, b)?;
        let agg = p.aggregate(a)?;
        let d_conv = conv2d_backward_input(&g, &[1, c, h, w], &agg)?;

        let d_a: Vec<f64> = branches
            .iter()
            .map(|br| sample(br, b).and_then(|s| s.dot(&g)))
            .collect::<Result<_>>()?;
        let d_logits = softmax_backward(a, &d_a);
        let d_pooled: Vec<f64> = (0..c)
            .map(|ci| {
                (0..k)
                    .map(|kk| d_logits[kk] * p.attn_weight[kk * c + ci])
                    .sum()
            })
            .collect();

        let len = c * h * w;
        let dst = &mut dx.data_mut()[b * len..(b + 1) * len];
        for (ci, plane) in dst.chunks_mut(h * w).enumerate() {
            let spread = d_pooled[ci] / (h * w) as f64;
            for (d, v) in plane
                .iter_mut()
                .zip(&d_conv.data()[ci * h * w..(ci + 1) * h * w])
            {
                *d = v + spread;
            }
        }
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::tensor::{finite_diff_grad, grad_relative_error};

    #[test]
    fn single_kernel_is_plain_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = OdconvParams::random(3, 4, 1, 3, &mut rng).unwrap();
        let x = Tensor::from_fn(&[2, 3, 5, 5], |_| rng.random_range(-1.0..1.0));
        let y = odconv(&x, &p).unwrap();
        let plain = conv2d(&x, &p.kernels[0]).unwrap();
        assert!(y
            .data()
            .iter()
            .zip(plain.data())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn saturated_logits_select_one_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut p = OdconvParams::random(2, 2, 2, 3, &mut rng).unwrap();
        p.attn_weight.iter_mut().for_each(|w| *w = 0.0);
        p.attn_bias = vec![50.0, -50.0];
        let x = Tensor::from_fn(&[1, 2, 4, 4], |_| rng.random_range(-1.0..1.0));
        let y = odconv(&x, &p).unwrap();
        let first = conv2d(&x, &p.kernels[0]).unwrap();
        assert!(y
            .data()
            .iter()
            .zip(first.data())
            .all(|(a, b)| (a - b).abs() < 1e-6));
    }

    #[test]
    fn empty_kernel_list_is_an_error() {
        assert!(OdconvParams::new(vec![], vec![], vec![]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = OdconvParams::random(3, 2, 3, 3, &mut rng).unwrap();
        let x = Tensor::from_fn(&[2, 3, 4, 5], |_| rng.random_range(-1.0..1.0));
        let y = odconv(&x, &p).unwrap();
        let probe = Tensor::from_fn(y.shape(), |_| rng.random_range(-1.0..1.0));
        let analytic = odconv_backward(&x, &p, &probe).unwrap();
        let numeric =
            finite_diff_grad(|t| odconv(t, &p).unwrap().dot(&probe).unwrap(), &x, 1e-3).unwrap();
        assert!(grad_relative_error(&analytic, &numeric) < 1e-6);
    }
}
