use rand::Rng;
use rand_distr::StandardNormal;

use super::{AugmentConfig, LabeledImage};
use crate::boxes::BBox;
use crate::tensor::Tensor;
use crate::{Error, Result};

fn hwc(img: &Tensor) -> Result<(usize, usize, usize)> {
    match *img.shape() {
        [h, w, c] => Ok((h, w, c)),
        ref s => Err(Error::shape("image rank", 3, s.len())),
    }
}

/// Bilinear resize with half-pixel centres and edge clamping.
pub fn resize_bilinear(img: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (h, w, c) = hwc(img)?;
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid("resize target must be positive"));
    }
    if (out_h, out_w) == (h, w) {
        return Ok(img.clone());
    }
    let taps = |o: usize, n: usize, out: usize| {
        let src = ((o as f64 + 0.5) * n as f64 / out as f64 - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = src.floor() as usize;
        (i0, (i0 + 1).min(n - 1), src - i0 as f64)
    };
    let d = img.data();
    let mut out = Vec::with_capacity(out_h * out_w * c);
    for oy in 0..out_h {
        let (y0, y1, fy) = taps(oy, h, out_h);
        for ox in 0..out_w {
            let (x0, x1, fx) = taps(ox, w, out_w);
            for ch in 0..c {
                let at = |y: usize, x: usize| d[(y * w + x) * c + ch];
                let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
                let bot = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
                out.push(top * (1.0 - fy) + bot * fy);
            }
        }
    }
    Tensor::new(vec![out_h, out_w, c], out)
}

/// Scale and padding of a letterbox mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LetterboxInfo {
    pub scale: f64,
    pub new_w: usize,
    pub new_h: usize,
    pub pad_x: usize,
    pub pad_y: usize,
    pub target: usize,
}

impl LetterboxInfo {
    pub fn forward(&self, b: &BBox) -> BBox {
        let t = self.target as f64;
        b.scale(self.scale)
            .translate(self.pad_x as f64, self.pad_y as f64)
            .clip(t, t)
    }

    pub fn inverse(&self, b: &BBox) -> BBox {
        b.translate(-(self.pad_x as f64), -(self.pad_y as f64))
            .scale(1.0 / self.scale)
    }
}

pub fn letterbox_info(width: usize, height: usize, target: usize) -> Result<LetterboxInfo> {
    if target == 0 {
        return Err(Error::invalid("letterbox target must be positive"));
    }
    if width == 0 || height == 0 {
        return Err(Error::invalid("image dimensions must be positive"));
    }
    let t = target as f64;
    let scale = (t / width as f64).min(t / height as f64);
    let fit = |n: usize| ((n as f64 * scale).round() as usize).clamp(1, target);
    let (new_w, new_h) = (fit(width), fit(height));
    Ok(LetterboxInfo {
        scale,
        new_w,
        new_h,
        pad_x: (target - new_w) / 2,
        pad_y: (target - new_h) / 2,
        target,
    })
}

/// Aspect-preserving resize onto a `target x target` canvas filled with
/// `pad_value`, image centred.
pub fn letterbox(src: &LabeledImage, target: usize, pad_value: f64) -> Result<LabeledImage> {
    let (h, w, c) = hwc(&src.image)?;
    let info = letterbox_info(w, h, target)?;
    let resized = resize_bilinear(&src.image, info.new_h, info.new_w)?;
    let mut canvas = Tensor::full(&[target, target, c], pad_value);
    let row = info.new_w * c;
    for y in 0..info.new_h {
        let dst = ((y + info.pad_y) * target + info.pad_x) * c;
        canvas.data_mut()[dst..dst + row].copy_from_slice(&resized.data()[y * row..(y + 1) * row]);
    }
    Ok(LabeledImage {
        image: canvas,
        boxes: src.boxes.iter().map(|b| info.forward(b)).collect(),
        classes: src.classes.clone(),
        weights: src.weights.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotometricGains {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
}

impl PhotometricGains {
    pub const NEUTRAL: Self = Self {
        brightness: 1.0,
        contrast: 1.0,
        saturation: 1.0,
    };

    pub fn sample(cfg: &AugmentConfig, rng: &mut impl Rng) -> Self {
        Self {
            brightness: cfg.brightness.sample(rng),
            contrast: cfg.contrast.sample(rng),
            saturation: cfg.saturation.sample(rng),
        }
    }
}

/// Brightness, then contrast about the image mean, then saturation against
/// the per-pixel channel mean; clamped to `[0, 1]`.
pub fn photometric_with_gains(img: &Tensor, g: PhotometricGains) -> Result<Tensor> {
    let (_, _, c) = hwc(img)?;
    let mut out = img.scale(g.brightness);
    let mean = out.sum() / out.len() as f64;
    let blend = |x: f64, anchor: f64, gain: f64| x * gain + anchor * (1.0 - gain);
    for v in out.data_mut() {
        *v = blend(*v, mean, g.contrast);
    }
    for px in out.data_mut().chunks_mut(c) {
        let gray = px.iter().sum::<f64>() / c as f64;
        for v in px.iter_mut() {
            *v = blend(*v, gray, g.saturation).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

pub fn photometric(img: &Tensor, cfg: &AugmentConfig, rng: &mut impl Rng) -> Result<Tensor> {
    photometric_with_gains(img, PhotometricGains::sample(cfg, rng))
}

/// Adds i.i.d. `N(0, sigma^2)` noise and clamps to `[0, 1]`.
pub fn gaussian_noise(img: &Tensor, sigma: f64, rng: &mut impl Rng) -> Result<Tensor> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!(
            "noise sigma must be non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let mut out = img.clone();
    for v in out.data_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = (*v + sigma * z).clamp(0.0, 1.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn bb(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    fn img(h: usize, w: usize) -> Tensor {
        Tensor::from_fn(&[h, w, 3], |i| ((i * 17) % 101) as f64 / 100.0)
    }

    #[test]
    fn letterbox_square_is_identity() {
        let src = LabeledImage::new(img(64, 64), vec![bb(3.0, 4.0, 20.0, 30.0)], vec![0]).unwrap();
        assert_eq!(letterbox(&src, 64, 0.5).unwrap(), src);
    }

    #[test]
    fn letterbox_wide_image_pads_vertically() {
        let src =
            LabeledImage::new(img(320, 640), vec![bb(0.0, 0.0, 10.0, 10.0)], vec![2]).unwrap();
        let out = letterbox(&src, 640, 114.0 / 255.0).unwrap();
        let info = letterbox_info(640, 320, 640).unwrap();
        assert_eq!((info.scale, info.pad_x, info.pad_y), (1.0, 0, 160));
        assert_eq!(out.boxes[0], bb(0.0, 160.0, 10.0, 170.0));
        assert_eq!(out.image.data()[0], 114.0 / 255.0);
        assert_eq!(out.image.data()[160 * 640 * 3], src.image.data()[0]);
    }

    #[test]
    fn letterbox_halves_large_image() {
        let src =
            LabeledImage::new(img(128, 128), vec![bb(10.0, 22.0, 64.0, 128.0)], vec![1]).unwrap();
        let out = letterbox(&src, 64, 0.0).unwrap();
        assert_eq!(out.boxes[0], bb(5.0, 11.0, 32.0, 64.0));
        assert_eq!(out.image.shape(), &[64, 64, 3]);
        assert!(letterbox(&src, 0, 0.0).is_err());
    }

    #[test]
    fn letterbox_inverse_round_trip() {
        let info = letterbox_info(500, 333, 640).unwrap();
        let b = bb(12.25, 30.5, 499.0, 333.0);
        let back = info.inverse(&info.forward(&b));
        for (p, q) in back.to_array().iter().zip(b.to_array()) {
            assert!((p - q).abs() < 1e-4);
        }
    }

    #[test]
    fn photometric_examples() {
        let x = img(5, 6);
        assert_eq!(
            photometric_with_gains(&x, PhotometricGains::NEUTRAL).unwrap(),
            x
        );
        let gray = photometric_with_gains(
            &x,
            PhotometricGains {
                saturation: 0.0,
                ..PhotometricGains::NEUTRAL
            },
        )
        .unwrap();
        assert!(gray.data().chunks(3).all(|p| p[0] == p[1] && p[1] == p[2]));
        let half = Tensor::full(&[1, 1, 3], 0.5);
        let bright = photometric_with_gains(
            &half,
            PhotometricGains {
                brightness: 1.2,
                ..PhotometricGains::NEUTRAL
            },
        )
        .unwrap();
        assert!(bright.data().iter().all(|&v| (v - 0.6).abs() < 1e-15));
    }

    #[test]
    fn noise_contract() {
        let x = img(8, 8);
        assert_eq!(gaussian_noise(&x, 0.0, &mut seeded(1)).unwrap(), x);
        assert!(gaussian_noise(&x, -0.1, &mut seeded(1)).is_err());
        let a = gaussian_noise(&x, 0.03, &mut seeded(9)).unwrap();
        assert_eq!(a, gaussian_noise(&x, 0.03, &mut seeded(9)).unwrap());
        assert_ne!(a, x);
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn bilinear_downsample_of_constant_is_constant() {
        let x = Tensor::full(&[9, 7, 2], 0.25);
        let y = resize_bilinear(&x, 4, 3).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.25));
    }
}
