//! Training-time augmentation: Mosaic, MixUp, photometric jitter, Gaussian
//! noise and letterbox scaling, with exact box bookkeeping.
//!
//! Images are `(H, W, C)` tensors with values in `[0, 1]`. All randomness
//! comes from an explicit generator so identical inputs, config and seed
//! reproduce bit-identical output.

mod affine;
mod image;
mod mosaic;

pub use affine::{transform_boxes, Affine};
pub use image::{
    gaussian_noise, letterbox, letterbox_info, photometric, photometric_with_gains,
    resize_bilinear, LetterboxInfo, PhotometricGains,
};
pub use mosaic::{mixup, mixup_with_lambda, mosaic, mosaic_canvas, MosaicPlan, TilePlacement};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boxes::BBox;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Image plus class-tagged boxes in absolute pixels.
///
/// `weights` carries each box's MixUp blend share (1 for unmixed images).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub image: Tensor,
    pub boxes: Vec<BBox>,
    pub classes: Vec<u32>,
    pub weights: Vec<f64>,
}

impl LabeledImage {
    pub fn new(image: Tensor, boxes: Vec<BBox>, classes: Vec<u32>) -> Result<Self> {
        let weights = vec![1.0; boxes.len()];
        let img = Self {
            image,
            boxes,
            classes,
            weights,
        };
        img.validate()?;
        Ok(img)
    }

    pub fn height(&self) -> usize {
        self.image.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.image.shape()[1]
    }

    pub fn channels(&self) -> usize {
        self.image.shape()[2]
    }

    pub fn validate(&self) -> Result<()> {
        if self.image.shape().len() != 3 {
            return Err(Error::shape("image rank", 3, self.image.shape().len()));
        }
        if self.classes.len() != self.boxes.len() {
            return Err(Error::shape(
                "class labels",
                self.boxes.len(),
                self.classes.len(),
            ));
        }
        if self.weights.len() != self.boxes.len() {
            return Err(Error::shape(
                "box weights",
                self.boxes.len(),
                self.weights.len(),
            ));
        }
        let (w, h) = (self.width() as f64, self.height() as f64);
        if let Some(b) = self.boxes.iter().find(|b| !b.is_within(w, h)) {
            return Err(Error::invalid(format!(
                "box {b:?} lies outside the {w}x{h} image"
            )));
        }
        Ok(())
    }

    pub(crate) fn with_image(&self, image: Tensor) -> Self {
        Self {
            image,
            ..self.clone()
        }
    }
}

/// Closed interval `[low, high]`, serialised as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span(pub f64, pub f64);

impl Span {
    pub fn fixed(v: f64) -> Self {
        Span(v, v)
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.0 == self.1 {
            self.0
        } else {
            rng.random_range(self.0..=self.1)
        }
    }

    fn check(&self, name: &str) -> Result<()> {
        if !(self.0.is_finite() && self.1.is_finite() && self.0 <= self.1) {
            return Err(Error::invalid(format!(
                "{name} range [{}, {}] is empty or non-finite",
                self.0, self.1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    pub scale_range: Span,
    pub rotation_deg: Span,
    pub mixup_range: Span,
    pub target_size: usize,
    pub noise_sigma: Span,
    pub brightness: Span,
    pub contrast: Span,
    pub saturation: Span,
    pub min_visible_frac: f64,
    pub pad_value: f64,
    /// Jitter each Mosaic tile and the MixUp partner separately rather than
    /// the stitched result.
    pub photometric_per_tile: bool,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            scale_range: Span(0.8, 1.2),
            rotation_deg: Span(-15.0, 15.0),
            mixup_range: Span(0.2, 0.4),
            target_size: 640,
            noise_sigma: Span(0.01, 0.05),
            brightness: Span(0.6, 1.4),
            contrast: Span(0.6, 1.4),
            saturation: Span(0.6, 1.4),
            min_visible_frac: 0.25,
            pad_value: 114.0 / 255.0,
            photometric_per_tile: true,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        self.scale_range.check("scale")?;
        self.rotation_deg.check("rotation")?;
        self.mixup_range.check("mixup")?;
        self.noise_sigma.check("noise sigma")?;
        self.brightness.check("brightness")?;
        self.contrast.check("contrast")?;
        self.saturation.check("saturation")?;
        if self.scale_range.0 <= 0.0 {
            return Err(Error::invalid("scale range must be positive"));
        }
        if self.mixup_range.0 < 0.0 || self.mixup_range.1 > 1.0 {
            return Err(Error::invalid("mixup range must lie within [0, 1]"));
        }
        if self.noise_sigma.0 < 0.0 {
            return Err(Error::invalid("noise sigma must be non-negative"));
        }
        if self.target_size == 0 {
            return Err(Error::invalid("target size must be positive"));
        }
        if !(self.min_visible_frac > 0.0 && self.min_visible_frac <= 1.0) {
            return Err(Error::invalid("min_visible_frac must be in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.pad_value) {
            return Err(Error::invalid("pad value must be in [0, 1]"));
        }
        Ok(())
    }
}

/// Full per-sample pipeline: photometric jitter, Mosaic of four tiles, MixUp
/// with a letterboxed partner, then Gaussian noise.
pub fn augment_sample(
    tiles: [&LabeledImage; 4],
    partner: &LabeledImage,
    cfg: &AugmentConfig,
    rng: &mut impl Rng,
) -> Result<LabeledImage> {
    cfg.validate()?;
    let per_tile = cfg.photometric_per_tile;
    let jitter = |img: &LabeledImage, rng: &mut _| -> Result<LabeledImage> {
        if per_tile {
            Ok(img.with_image(photometric(&img.image, cfg, rng)?))
        } else {
            Ok(img.clone())
        }
    };
    let jittered = tiles
        .iter()
        .map(|t| jitter(t, rng))
        .collect::<Result<Vec<_>>>()?;
    let partner = jitter(partner, rng)?;
    let mut mosaic = mosaic(&jittered, cfg, rng)?;
    let partner = letterbox(&partner, cfg.target_size, cfg.pad_value)?;
    if !per_tile {
        mosaic.image = photometric(&mosaic.image, cfg, rng)?;
    }
    let mut mixed = mixup(&mosaic, &partner, cfg, rng)?;
    let sigma = cfg.noise_sigma.sample(rng);
    mixed.image = gaussian_noise(&mixed.image, sigma, rng)?;
    Ok(mixed)
}
