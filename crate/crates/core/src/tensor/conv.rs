use super::Tensor;
use crate::{Error, Result};

/// Kernel, bias and geometry of a 2D cross-correlation.
///
/// `kernel` has shape `(F, C / groups, kh, kw)`. Padding is given per spatial
/// axis so that `1 x k` and `k x 1` kernels can preserve the input extent.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvSpec {
    pub kernel: Tensor,
    pub bias: Vec<f64>,
    pub stride: usize,
    pub padding: (usize, usize),
    pub dilation: usize,
    pub groups: usize,
}

impl ConvSpec {
    pub fn new(kernel: Tensor, bias: Vec<f64>) -> Result<Self> {
        let spec = Self {
            kernel,
            bias,
            stride: 1,
            padding: (0, 0),
            dilation: 1,
            groups: 1,
        };
        spec.validate_kernel()?;
        Ok(spec)
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_padding(mut self, pad_h: usize, pad_w: usize) -> Self {
        self.padding = (pad_h, pad_w);
        self
    }

    pub fn with_dilation(mut self, dilation: usize) -> Self {
        self.dilation = dilation;
        self
    }

    pub fn with_groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        self
    }

    /// `1 x 1` convolution whose kernel is the identity matrix.
    pub fn identity(channels: usize) -> Self {
        let kernel = Tensor::from_fn(&[channels, channels, 1, 1], |i| {
            if i / channels == i % channels {
                1.0
            } else {
                0.0
            }
        });
        Self::new(kernel, vec![0.0; channels]).expect("identity kernel is well formed")
    }

    /// Depthwise convolution with "same" padding for odd kernel extents.
    pub fn depthwise_same(kernel: Tensor, dilation: usize) -> Result<Self> {
        let (channels, one, kh, kw) = kernel.dims4()?;
        if one != 1 {
            return Err(Error::shape("kernel input channels per group", 1, one));
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::invalid(format!(
                "same padding needs odd kernel extents, got {kh}x{kw}"
            )));
        }
        Ok(Self::new(kernel, vec![0.0; channels])?
            .with_groups(channels)
            .with_dilation(dilation)
            .with_padding(dilation * (kh - 1) / 2, dilation * (kw - 1) / 2))
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.shape()[1] * self.groups
    }

    pub fn kernel_size(&self) -> (usize, usize) {
        (self.kernel.shape()[2], self.kernel.shape()[3])
    }

    pub fn is_depthwise(&self) -> bool {
        self.groups == self.out_channels() && self.kernel.shape()[1] == 1
    }

    /// Same geometry, different kernel values (bias reset to zero).
    pub fn with_kernel(&self, kernel: Tensor) -> Result<Self> {
        let mut spec = self.clone();
        spec.bias = vec![0.0; kernel.shape().first().copied().unwrap_or(0)];
        spec.kernel = kernel;
        spec.validate_kernel()?;
        Ok(spec)
    }

    fn validate_kernel(&self) -> Result<()> {
        let (f, _, _, _) = self.kernel.dims4()?;
        if self.bias.len() != f {
            return Err(Error::shape("bias length", f, self.bias.len()));
        }
        Ok(())
    }

    /// Output spatial extent for an `h x w` input.
    pub fn output_extent(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        if self.stride == 0 || self.dilation == 0 {
            return Err(Error::invalid("stride and dilation must be positive"));
        }
        let (kh, kw) = self.kernel_size();
        let extent = |len: usize, pad: usize, k: usize, axis: &str| {
            let span = self.dilation * (k - 1) + 1;
            let padded = len + 2 * pad;
            if padded < span {
                return Err(Error::EmptyOutput(format!(
                    "{axis}: padded extent {padded} is smaller than the dilated kernel {span}"
                )));
            }
            Ok((padded - span) / self.stride + 1)
        };
        Ok((
            extent(h, self.padding.0, kh, "height")?,
            extent(w, self.padding.1, kw, "width")?,
        ))
    }

    fn check_input(&self, c: usize) -> Result<()> {
        self.validate_kernel()?;
        let f = self.out_channels();
        if self.groups == 0 || !c.is_multiple_of(self.groups) {
            return Err(Error::invalid(format!(
                "groups {} must divide input channels {c}",
                self.groups
            )));
        }
        if !f.is_multiple_of(self.groups) {
            return Err(Error::invalid(format!(
                "groups {} must divide output channels {f}",
                self.groups
            )));
        }
        let per_group = self.kernel.shape()[1];
        if per_group * self.groups != c {
            return Err(Error::shape("input channels", per_group * self.groups, c));
        }
        Ok(())
    }
}

/// Visits every (output, input, kernel tap) triple of a convolution.
///
/// `visit(out_index, in_index, kernel_index)` is called for taps that land
/// inside the unpadded input.
fn for_each_tap(
    spec: &ConvSpec,
    (n, c, h, w): (usize, usize, usize, usize),
    (oh, ow): (usize, usize),
    mut visit: impl FnMut(usize, usize, usize),
) {
    let f = spec.out_channels();
    let (kh, kw) = spec.kernel_size();
    let cpg = c / spec.groups;
    let fpg = f / spec.groups;
    let (ph, pw) = spec.padding;
    let (s, d) = (spec.stride, spec.dilation);
    for b in 0..n {
        for fo in 0..f {
            let g = fo / fpg;
            for ci in 0..cpg {
                let cin = g * cpg + ci;
                let in_plane = (b * c + cin) * h * w;
                let k_base = (fo * cpg + ci) * kh * kw;
                for ki in 0..kh {
                    for kj in 0..kw {
                        let k_idx = k_base + ki * kw + kj;
                        for oy in 0..oh {
                            let iy = (oy * s + ki * d) as isize - ph as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let out_row = ((b * f + fo) * oh + oy) * ow;
                            let in_row = in_plane + iy as usize * w;
                            for ox in 0..ow {
                                let ix = (ox * s + kj * d) as isize - pw as isize;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                visit(out_row + ox, in_row + ix as usize, k_idx);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// 2D cross-correlation (no kernel flip) with bias.
pub fn conv2d(x: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    spec.check_input(c)?;
    let (oh, ow) = spec.output_extent(h, w)?;
    let f = spec.out_channels();
    let mut out = Tensor::zeros(&[n, f, oh, ow]);
    for (plane, &b) in out
        .data_mut()
        .chunks_mut(oh * ow)
        .zip(spec.bias.iter().cycle())
    {
        plane.fill(b);
    }
    let xd = x.data();
    let kd = spec.kernel.data();
    let od = out.data_mut();
    for_each_tap(spec, (n, c, h, w), (oh, ow), |o, i, k| {
        od[o] += xd[i] * kd[k];
    });
    Ok(out)
}

/// Gradient of `conv2d` with respect to its input.
pub fn conv2d_backward_input(
    grad: &Tensor,
    input_shape: &[usize],
    spec: &ConvSpec,
) -> Result<Tensor> {
    let &[n, c, h, w] = input_shape else {
        return Err(Error::shape("rank", 4, input_shape.len()));
    };
    spec.check_input(c)?;
    let (oh, ow) = spec.output_extent(h, w)?;
    let expected = [n, spec.out_channels(), oh, ow];
    grad.expect_same_shape(&Tensor::zeros(&expected))?;
    let mut out = Tensor::zeros(input_shape);
    let gd = grad.data();
    let kd = spec.kernel.data();
    let od = out.data_mut();
    for_each_tap(spec, (n, c, h, w), (oh, ow), |o, i, k| {
        od[i] += gd[o] * kd[k];
    });
    Ok(out)
}
