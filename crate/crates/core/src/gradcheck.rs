//! Finite-difference verification of every hand-written gradient.
//!
//! Each check draws random inputs away from the non-differentiable points of
//! its function, compares the analytic gradient with a central difference
//! and records the worst relative error.

use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::blocks::{
    bifpn_fuse, bifpn_fuse_backward, coordinate_attention, coordinate_attention_backward,
    coordinate_attention_forward, lska, lska_backward, odconv, odconv_backward, BifpnNodeParams,
    CaParams, LskaParams, OdconvParams,
};
use crate::boxes::{
    bce_with_logits, ciou_alpha, ciou_loss, ciou_value_frozen, eiou_loss, focal_loss,
    wiou_constants, wiou_loss, wiou_value_frozen, BBox, LossValue, WiouState, FOCAL_ALPHA,
    FOCAL_GAMMA,
};
use crate::rng::item_rng;
use crate::tensor::{finite_diff_grad, grad_relative_error, ConvSpec, Tensor};
use crate::Result;

pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_EPS: f64 = 1e-3;
pub const DEFAULT_TOLERANCE: f64 = 1e-3;

/// Every function the suite covers, in report order.
pub const CHECK_NAMES: [&str; 9] = [
    "ciou_loss",
    "eiou_loss",
    "wiou_loss",
    "focal_loss",
    "bce_with_logits",
    "coordinate_attention",
    "bifpn_fuse",
    "odconv",
    "lska",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckConfig {
    pub trials: usize,
    pub eps: f64,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            trials: DEFAULT_TRIALS,
            eps: DEFAULT_EPS,
            tolerance: DEFAULT_TOLERANCE,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub trials: usize,
    pub max_rel_error: f64,
    pub failures: usize,
    pub elapsed_ms: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.max_rel_error.is_finite()
    }
}

/// Minimum gap kept between any coordinate pair whose ordering decides a
/// `min`/`max` inside the IoU-family losses.
const BOX_MARGIN: f64 = 0.05;

/// A predicted/ground-truth pair with every overlap and enclosure decision
/// at least [`BOX_MARGIN`] away from a tie.
pub fn random_box_pair(rng: &mut impl Rng) -> (BBox, BBox) {
    let separated = |a: &[f64; 4], b: &[f64; 4]| {
        [
            (0, 0),
            (0, 2),
            (2, 0),
            (2, 2),
            (1, 1),
            (1, 3),
            (3, 1),
            (3, 3),
        ]
        .iter()
        .all(|&(i, j)| (a[i] - b[j]).abs() > BOX_MARGIN)
    };
    loop {
        let gt = random_box(rng, 0.0..20.0, 1.0..10.0);
        let pred = random_box(rng, 0.0..24.0, 1.0..12.0);
        if separated(&pred.to_array(), &gt.to_array()) {
            return (pred, gt);
        }
    }
}

fn random_box(
    rng: &mut impl Rng,
    corner: std::ops::Range<f64>,
    size: std::ops::Range<f64>,
) -> BBox {
    let x = rng.random_range(corner.clone());
    let y = rng.random_range(corner);
    let w = rng.random_range(size.clone());
    let h = rng.random_range(size);
    BBox::new(x, y, x + w, y + h).expect("positive size")
}

fn box_tensor(b: &BBox) -> Tensor {
    Tensor::new(vec![4], b.to_array().to_vec()).expect("four corners")
}

fn tensor_box(t: &Tensor) -> BBox {
    let d = t.data();
    BBox {
        x1: d[0],
        y1: d[1],
        x2: d[2],
        y2: d[3],
    }
}

fn box_error(
    analytic: &LossValue,
    pred: &BBox,
    eps: f64,
    value: impl Fn(&BBox) -> f64,
) -> Result<f64> {
    let numeric = finite_diff_grad(|t| value(&tensor_box(t)), &box_tensor(pred), eps)?;
    let analytic = Tensor::new(vec![4], analytic.grad_pred.to_vec())?;
    Ok(grad_relative_error(&analytic, &numeric))
}

fn scalar_error(analytic: f64, x: f64, eps: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    let numeric = finite_diff_grad(|t| f(t.data()[0]), &Tensor::full(&[1], x), eps)?;
    Ok(grad_relative_error(&Tensor::full(&[1], analytic), &numeric))
}

fn random_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Error of `backward(probe)` against the finite difference of `<forward(x), probe>`.
fn block_error(
    x: &Tensor,
    eps: f64,
    rng: &mut impl Rng,
    forward: impl Fn(&Tensor) -> Result<Tensor>,
    backward: impl Fn(&Tensor) -> Result<Tensor>,
) -> Result<f64> {
    let probe = random_tensor(forward(x)?.shape(), rng);
    let analytic = backward(&probe)?;
    let numeric = finite_diff_grad(
        |t| forward(t).and_then(|y| y.dot(&probe)).unwrap_or(f64::NAN),
        x,
        eps,
    )?;
    Ok(grad_relative_error(&analytic, &numeric))
}

fn trial_ciou(rng: &mut impl Rng, eps: f64) -> Result<f64> {
    let (pred, gt) = random_box_pair(rng);
    let alpha = ciou_alpha(&pred, &gt);
    box_error(&ciou_loss(&pred, &gt)?, &pred, eps, |p| {
        ciou_value_frozen(p, &gt, alpha)
    })
}

fn trial_eiou(rng: &mut impl Rng, eps: f64) -> Result<f64> {
    let (pred, gt) = random_box_pair(rng);
    box_error(&eiou_loss(&pred, &gt)?, &pred, eps, |p| {
        eiou_loss(p, &gt).map_or(f64::NAN, |l| l.value)
    })
}

fn trial_wiou(rng: &mut impl Rng, eps: f64) -> Result<f64> {
    let (pred, gt) = random_box_pair(rng);
    let state = WiouState::default().with_mean(rng.random_range(0.2..1.0))?;
    let (loss, _) = wiou_loss(&pred, &gt, &state)?;
    let (diag2, focus) = wiou_constants(&pred, &gt, &state).expect("state is initialised");
    box_error(&loss, &pred, eps, |p| {
        wiou_value_frozen(p, &gt, diag2, focus)
    })
}

fn trial_focal(rng: &mut impl Rng, eps: f64) -> Result<f64> {
    let p = rng.random_range(0.05..0.95);
    let target = rng.random_bool(0.5);
    let analytic = focal_loss(p, target, FOCAL_ALPHA, FOCAL_GAMMA)?.grad;
    scalar_error(analytic, p, eps, |q| {
        focal_loss(q, target, FOCAL_ALPHA, FOCAL_GAMMA).map_or(f64::NAN, |l| l.value)
    })
}

fn trial_bce(rng: &mut impl Rng, eps: f64) -> Result<f64> {
    let z = rng.random_range(-8.0..8.0);
    let target = rng.random_bool(0.5);
    scalar_error(bce_with_logits(z, target).grad, z, eps, |v| {
        bce_with_logits(v, target).value
    })
}

fn trial_ca(rng: &mut impl Rng, eps: f64) -> Result<f64> {
    let (p, x) = loop {
        let p = CaParams::random(4, 2, rng)?;
        let x = Tensor::from_fn(&[1, 4, 8, 8], |_| rng.random_range(-2.0..2.0));
        let fwd = coordinate_attention_forward(&x, &p)?;
        if fwd.pre_activation.data().iter().all(|v| v.abs() > 1e-2) {
            break (p, x);
        }
    };
    block_error(
        &x,
        eps,
        rng,
        |t| coordinate_attention(t, &p),
        |g| coordinate_attention_backward(&x, &p, g),
    )
}

fn trial_bifpn(rng: &mut impl Rng, eps: f64) -> Result<f64> {
    let c = 3;
    let kernel = random_tensor(&[c, c, 3, 3], rng).scale(0.3);
    let post = ConvSpec::new(
        kernel,
        (0..c).map(|_| rng.random_range(-0.1..0.1)).collect(),
    )?
    .with_padding(1, 1);
    let weights = (0..3).map(|_| rng.random_range(0.1..2.0)).collect();
    let p = BifpnNodeParams::new(weights, 1e-4, post)?;
    let inputs = vec![
        random_tensor(&[1, c, 8, 8], rng),
        random_tensor(&[1, c, 4, 4], rng),
        random_tensor(&[1, c, 8, 8], rng),
    ];
    let out = bifpn_fuse(&inputs, &p)?;
    let probe = random_tensor(out.shape(), rng);
    let grads = bifpn_fuse_backward(&inputs, &p, &probe)?;
    let mut worst = 0.0f64;
    for (k, g) in grads.iter().enumerate() {
        let numeric = finite_diff_grad(
            |t| {
                let mut v = inputs.clone();
                v[k] = t.clone();
                bifpn_fuse(&v, &p)
                    .and_then(|y| y.dot(&probe))
                    .unwrap_or(f64::NAN)
            },
            &inputs[k],
            eps,
        )?;
        worst = worst.max(grad_relative_error(g, &numeric));
    }
    Ok(worst)
}

fn trial_odconv(rng: &mut impl Rng, eps: f64) -> Result<f64> {
    let p = OdconvParams::random(4, 4, 3, 3, rng)?;
    let x = random_tensor(&[1, 4, 6, 6], rng);
    block_error(
        &x,
        eps,
        rng,
        |t| odconv(t, &p),
        |g| odconv_backward(&x, &p, g),
    )
}

fn trial_lska(rng: &mut impl Rng, eps: f64) -> Result<f64> {
    let p = LskaParams::random(4, 5, 2, rng)?;
    let x = random_tensor(&[1, 4, 8, 8], rng);
    block_error(&x, eps, rng, |t| lska(t, &p), |g| lska_backward(&x, &p, g))
}

/// Runs `trials` independent trials of the named check.
pub fn run_check(name: &str, cfg: &GradcheckConfig) -> Result<CheckResult> {
    let idx = CHECK_NAMES
        .iter()
        .position(|&n| n == name)
        .ok_or_else(|| crate::Error::invalid(format!("unknown gradient check {name:?}")))?;
    let start = Instant::now();
    let mut max_rel_error = 0.0f64;
    let mut failures = 0;
    for t in 0..cfg.trials {
        let mut rng = item_rng(cfg.seed.wrapping_add(idx as u64 * 1_000_003), t as u64);
        let err = match idx {
            0 => trial_ciou(&mut rng, cfg.eps),
            1 => trial_eiou(&mut rng, cfg.eps),
            2 => trial_wiou(&mut rng, cfg.eps),
            3 => trial_focal(&mut rng, cfg.eps),
            4 => trial_bce(&mut rng, cfg.eps),
            5 => trial_ca(&mut rng, cfg.eps),
            6 => trial_bifpn(&mut rng, cfg.eps),
            7 => trial_odconv(&mut rng, cfg.eps),
            _ => trial_lska(&mut rng, cfg.eps),
        }
        .unwrap_or(f64::NAN);
        if !(err < cfg.tolerance) {
            failures += 1;
        }
        max_rel_error = if err.is_nan() {
            f64::NAN
        } else {
            max_rel_error.max(err)
        };
    }
    Ok(CheckResult {
        name: name.to_string(),
        trials: cfg.trials,
        max_rel_error,
        failures,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// The full suite, one result per entry of [`CHECK_NAMES`].
pub fn run_gradcheck(cfg: &GradcheckConfig) -> Result<Vec<CheckResult>> {
    CHECK_NAMES.iter().map(|n| run_check(n, cfg)).collect()
}
