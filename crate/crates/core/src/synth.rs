//! Deterministic synthetic sign-like scenes for smoke tests and demos.

use rand::Rng;

use crate::augment::LabeledImage;
use crate::boxes::BBox;
use crate::rng::item_rng;
use crate::tensor::Tensor;
use crate::Result;

/// Fill colour per class.
pub const CLASS_COLORS: [[f64; 3]; 4] = [
    [0.85, 0.1, 0.1],
    [0.1, 0.3, 0.85],
    [0.95, 0.8, 0.1],
    [0.1, 0.7, 0.2],
];

/// Class `c` objects are drawn as discs when `c` is odd and squares otherwise.
fn inside(class_id: u32, b: &BBox, x: f64, y: f64) -> bool {
    if class_id.is_multiple_of(2) {
        return true;
    }
    let (cx, cy) = b.center();
    let (rx, ry) = (b.width() / 2.0, b.height() / 2.0);
    ((x - cx) / rx).powi(2) + ((y - cy) / ry).powi(2) <= 1.0
}

/// One scene: a smooth background and one to three objects with integer
/// pixel boxes.
pub fn synth_scene(width: usize, height: usize, seed: u64, index: u64) -> Result<LabeledImage> {
    let mut rng = item_rng(seed, index);
    let tint: [f64; 3] = [0.0; 3].map(|_| rng.random_range(0.3..0.6));
    let mut image = Tensor::from_fn(&[height, width, 3], |i| {
        let px = i / 3;
        let (x, y) = ((px % width) as f64, (px / width) as f64);
        tint[i % 3] * (0.8 + 0.2 * (x / width as f64 + y / height as f64) / 2.0)
    });
    let n = rng.random_range(1..=3);
    let (mut boxes, mut classes) = (Vec::new(), Vec::new());
    let max_side = (width.min(height) / 3).max(4);
    for _ in 0..n {
        let class_id = rng.random_range(0..CLASS_COLORS.len() as u32);
        let w = rng.random_range(4..=max_side);
        let h = (w as f64 * rng.random_range(0.7..1.4))
            .round()
            .clamp(4.0, height as f64) as usize;
        let x1 = rng.random_range(0..=width - w);
        let y1 = rng.random_range(0..=height - h);
        let b = BBox::new(x1 as f64, y1 as f64, (x1 + w) as f64, (y1 + h) as f64)?;
        let color = CLASS_COLORS[class_id as usize];
        let data = image.data_mut();
        for y in y1..y1 + h {
            for x in x1..x1 + w {
                if inside(class_id, &b, x as f64 + 0.5, y as f64 + 0.5) {
                    data[(y * width + x) * 3..][..3].copy_from_slice(&color);
                }
            }
        }
        boxes.push(b);
        classes.push(class_id);
    }
    LabeledImage::new(image, boxes, classes)
}

pub fn synth_dataset(
    count: usize,
    width: usize,
    height: usize,
    seed: u64,
) -> Result<Vec<LabeledImage>> {
    (0..count)
        .map(|i| synth_scene(width, height, seed, i as u64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_deterministic_and_valid() {
        let a = synth_dataset(5, 64, 48, 3).unwrap();
        assert_eq!(a, synth_dataset(5, 64, 48, 3).unwrap());
        assert_ne!(a[0], a[1]);
        for s in &a {
            s.validate().unwrap();
            assert!((1..=3).contains(&s.boxes.len()));
            assert!(s.image.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
