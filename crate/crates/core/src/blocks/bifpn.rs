//! BiFPN fast normalised fusion: `O = conv(sum_i w_i I_i / (eps + sum_i w_i))`
//! with every input first resized to the first input's extent.

use crate::tensor::{
    conv2d, conv2d_backward_input, resize_nearest, resize_nearest_backward, ConvSpec, Tensor,
};
use crate::{Error, Result};

pub const DEFAULT_FUSION_EPS: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct BifpnNodeParams {
    /// One learnable weight per fused input; clamped at zero before use.
    pub weights: Vec<f64>,
    pub epsilon: f64,
    pub post_conv: ConvSpec,
}

impl BifpnNodeParams {
    pub fn new(weights: Vec<f64>, epsilon: f64, post_conv: ConvSpec) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::invalid(format!(
                "fusion epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(Self {
            weights,
            epsilon,
            post_conv,
        })
    }

    /// Unit weights, default epsilon and an identity `1 x 1` post convolution.
    pub fn uniform(inputs: usize, channels: usize) -> Self {
        Self {
            weights: vec![1.0; inputs],
            epsilon: DEFAULT_FUSION_EPS,
            post_conv: ConvSpec::identity(channels),
        }
    }

    /// Rectified weights divided by `eps + sum(rectified)`.
    pub fn normalized_weights(&self) -> Vec<f64> {
        let rect: Vec<f64> = self.weights.iter().map(|w| w.max(0.0)).collect();
        let denom = self.epsilon + rect.iter().sum::<f64>();
        rect.into_iter().map(|w| w / denom).collect()
    }
}

fn check_inputs(inputs: &[Tensor], p: &BifpnNodeParams) -> Result<(usize, usize, usize, usize)> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::invalid("BiFPN fusion needs at least one input"))?;
    if inputs.len() < 2 {
        return Err(Error::invalid("BiFPN fusion needs at least two inputs"));
    }
    if p.weights.len() != inputs.len() {
        return Err(Error::shape(
            "fusion weights",
            inputs.len(),
            p.weights.len(),
        ));
    }
    if !(p.epsilon > 0.0) {
        return Err(Error::invalid("fusion epsilon must be positive"));
    }
    let dims = first.dims4()?;
    for t in &inputs[1..] {
        let (n, c, _, _) = t.dims4()?;
        if n != dims.0 {
            return Err(Error::shape("batch", dims.0, n));
        }
        if c != dims.1 {
            return Err(Error::shape("channels", dims.1, c));
        }
    }
    Ok(dims)
}

/// The normalised weighted sum before `post_conv`.
fn fuse_only(inputs: &[Tensor], p: &BifpnNodeParams) -> Result<Tensor> {
    let (n, c, h, w) = check_inputs(inputs, p)?;
    let mut fused = Tensor::zeros(&[n, c, h, w]);
    for (t, wt) in inputs.iter().zip(p.normalized_weights()) {
        let resized = resize_nearest(t, h, w)?;
        fused.add_scaled(&resized, wt)?;
    }
    Ok(fused)
}

pub fn bifpn_fuse(inputs: &[Tensor], p: &BifpnNodeParams) -> Result<Tensor> {
    conv2d(&fuse_only(inputs, p)?, &p.post_conv)
}

/// Gradients with respect to every input, given `dL/doutput`.
pub fn bifpn_fuse_backward(
    inputs: &[Tensor],
    p: &BifpnNodeParams,
    grad: &Tensor,
) -> Result<Vec<Tensor>> {
    let (n, c, h, w) = check_inputs(inputs, p)?;
    let d_fused = conv2d_backward_input(grad, &[n, c, h, w], &p.post_conv)?;
    inputs
        .iter()
        .zip(p.normalized_weights())
        .map(|(t, wt)| resize_nearest_backward(&d_fused.scale(wt), t.shape()))
        .collect()
}

/// Level-4 top-down and output nodes:
///
/// `p4_td = conv((w1 p4_in + w2 resize(p5_in)) / (w1 + w2 + eps))`
/// `p4_out = conv((w1' p4_in + w2' p4_td + w3' resize(p3_out)) / (w1' + w2' + w3' + eps))`
///
/// `p5_in` must be half and `p3_out` double the spatial extent of `p4_in`.
pub fn bifpn_layer4(
    p4_in: &Tensor,
    p5_in: &Tensor,
    p3_out: &Tensor,
    td: &BifpnNodeParams,
    out: &BifpnNodeParams,
) -> Result<(Tensor, Tensor)> {
    let (_, _, h4, w4) = p4_in.dims4()?;
    let (_, _, h5, w5) = p5_in.dims4()?;
    let (_, _, h3, w3) = p3_out.dims4()?;
    for (name, expected, actual) in [
        ("p5_in height", h4, 2 * h5),
        ("p5_in width", w4, 2 * w5),
        ("p3_out height", 2 * h4, h3),
        ("p3_out width", 2 * w4, w3),
    ] {
        if expected != actual {
            return Err(Error::invalid(format!(
                "{name} is not at the 2x pyramid ratio relative to p4_in"
            )));
        }
    }
    let p4_td = bifpn_fuse(&[p4_in.clone(), p5_in.clone()], td)?;
    let p4_out = bifpn_fuse(&[p4_in.clone(), p4_td.clone(), p3_out.clone()], out)?;
    Ok((p4_td, p4_out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{finite_diff_grad, grad_relative_error};

    fn scalar(v: f64) -> Tensor {
        Tensor::full(&[1, 1, 1, 1], v)
    }

    #[test]
    fn scalar_trace() {
        let p = BifpnNodeParams::new(vec![1.0, 2.0], 1e-4, ConvSpec::identity(1)).unwrap();
        let o = bifpn_fuse(&[scalar(3.0), scalar(6.0)], &p).unwrap();
        assert!((o.data()[0] - 15.0 / 3.0001).abs() < 1e-12);
        assert!((o.data()[0] - 4.99983).abs() < 1e-5);
    }

    #[test]
    fn zero_weight_input_has_no_effect() {
        let p = BifpnNodeParams::new(vec![1.0, 0.0], 1e-4, ConvSpec::identity(2)).unwrap();
        let a = Tensor::from_fn(&[1, 2, 4, 4], |i| i as f64);
        let b1 = Tensor::from_fn(&[1, 2, 2, 2], |i| i as f64 * 3.0);
        let b2 = Tensor::from_fn(&[1, 2, 2, 2], |i| -(i as f64));
        assert_eq!(
            bifpn_fuse(&[a.clone(), b1], &p).unwrap(),
            bifpn_fuse(&[a, b2], &p).unwrap()
        );
        let neg = BifpnNodeParams::new(vec![1.0, -5.0], 1e-4, ConvSpec::identity(1)).unwrap();
        assert_eq!(neg.normalized_weights()[1], 0.0);
    }

    #[test]
    fn layer4_scalar_trace() {
        let p4 = Tensor::full(&[1, 1, 2, 2], 2.0);
        let p5 = Tensor::full(&[1, 1, 1, 1], 4.0);
        let p3 = Tensor::full(&[1, 1, 4, 4], 8.0);
        let (td, out) = bifpn_layer4(
            &p4,
            &p5,
            &p3,
            &BifpnNodeParams::uniform(2, 1),
            &BifpnNodeParams::uniform(3, 1),
        )
        .unwrap();
        let td_v = 6.0 / (2.0 + 1e-4);
        assert!(td.data().iter().all(|v| (v - td_v).abs() < 1e-12));
        let out_v = (2.0 + td_v + 8.0) / (3.0 + 1e-4);
        assert!(out.data().iter().all(|v| (v - out_v).abs() < 1e-12));
        assert!((out_v - 4.3333).abs() < 1e-3);
        assert!(bifpn_layer4(
            &p4,
            &p3,
            &p5,
            &BifpnNodeParams::uniform(2, 1),
            &BifpnNodeParams::uniform(3, 1)
        )
        .is_err());
    }

    #[test]
    fn input_list_errors() {
        let p = BifpnNodeParams::uniform(2, 1);
        assert!(bifpn_fuse(&[], &p).is_err());
        assert!(bifpn_fuse(&[scalar(1.0)], &p).is_err());
        assert!(BifpnNodeParams::new(vec![1.0], 0.0, ConvSpec::identity(1)).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let post = ConvSpec::new(
            Tensor::from_fn(&[2, 2, 3, 3], |i| ((i * 5 % 9) as f64 - 4.0) / 4.0),
            vec![0.3, -0.2],
        )
        .unwrap()
        .with_padding(1, 1);
        let p = BifpnNodeParams::new(vec![0.7, 1.3, 0.4], 1e-4, post).unwrap();
        let inputs = vec![
            Tensor::from_fn(&[1, 2, 4, 4], |i| (i as f64 * 0.3).sin()),
            Tensor::from_fn(&[1, 2, 2, 2], |i| (i as f64 * 0.7).cos()),
            Tensor::from_fn(&[1, 2, 8, 8], |i| (i as f64 * 0.11).sin()),
        ];
        let out = bifpn_fuse(&inputs, &p).unwrap();
        let probe = Tensor::from_fn(out.shape(), |i| (i as f64 * 0.5).cos());
        let grads = bifpn_fuse_backward(&inputs, &p, &probe).unwrap();
        for k in 0..inputs.len() {
            let numeric = finite_diff_grad(
                |t| {
                    let mut v = inputs.clone();
                    v[k] = t.clone();
                    bifpn_fuse(&v, &p).unwrap().dot(&probe).unwrap()
                },
                &inputs[k],
                1e-3,
            )
            .unwrap();
            assert!(grad_relative_error(&grads[k], &numeric) < 1e-8);
        }
    }
}
