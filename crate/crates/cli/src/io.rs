//! Files on disk: PNG images, label directories and content hashes.
//!
//! A dataset directory holds `images/<stem>.png` and `labels/<stem>.txt`.
//! A label directory is either such a dataset or a flat folder of `.txt`
//! files.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{ImageFormat, RgbImage};
use sha2::{Digest, Sha256};
use tsr_core::augment::LabeledImage;
use tsr_core::labels::{parse_label_file, serialize_label_file, LabelRecord};
use tsr_core::tensor::Tensor;

use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| io_err(path, e))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Writes `bytes`, creating parent directories as needed.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Decodes a PNG to an `[h, w, 3]` tensor in `[0, 1]`.
pub fn decode_png(bytes: &[u8], path: &Path) -> Result<Tensor, CliError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| io_err(path, e))?
        .to_rgb8();
    let (w, h) = img.dimensions();
    let data = img
        .into_raw()
        .into_iter()
        .map(|v| v as f64 / 255.0)
        .collect();
    Ok(Tensor::new(vec![h as usize, w as usize, 3], data)?)
}

/// Encodes an `[h, w, 3]` tensor in `[0, 1]` as 8-bit PNG.
pub fn encode_png(t: &Tensor) -> Result<Vec<u8>, CliError> {
    let &[h, w, 3] = t.shape() else {
        return Err(CliError::Validation(format!(
            "expected an [h, w, 3] image, got {:?}",
            t.shape()
        )));
    };
    let raw = t
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let img = RgbImage::from_raw(w as u32, h as u32, raw).expect("buffer matches dimensions");
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| CliError::Io(format!("png encoding: {e}")))?;
    Ok(out.into_inner())
}

/// `.{ext}` files of a directory as sorted `(stem, path)` pairs.
fn list(dir: &Path, ext: &str) -> Result<Vec<(String, PathBuf)>, CliError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((stem.to_owned(), path.clone()));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Label files of a dataset or flat label directory.
pub fn label_files(dir: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    let labels = dir.join("labels");
    list(if labels.is_dir() { &labels } else { dir }, "txt")
}

/// Size of `images/<stem>.png` next to a label directory, if present.
pub fn image_size(dir: &Path, stem: &str) -> Result<Option<(f64, f64)>, CliError> {
    let path = dir.join("images").join(format!("{stem}.png"));
    if !path.is_file() {
        return Ok(None);
    }
    let (w, h) = image::image_dimensions(&path).map_err(|e| io_err(&path, e))?;
    Ok(Some((w as f64, h as f64)))
}

pub fn read_labels(
    path: &Path,
    w: f64,
    h: f64,
    expect_scores: bool,
) -> Result<Vec<LabelRecord>, CliError> {
    parse_label_file(&read_text(path)?, w, h, expect_scores)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub stem: String,
    pub item: LabeledImage,
    /// Raw PNG bytes, kept for hashing.
    pub png: Vec<u8>,
}

/// Reads every image of a dataset directory with its labels. Each image
/// needs a label file and vice versa.
pub fn read_dataset(dir: &Path) -> Result<Vec<Sample>, CliError> {
    let images = list(&dir.join("images"), "png")?;
    let labels = list(&dir.join("labels"), "txt")?;
    let image_stems: Vec<&String> = images.iter().map(|(s, _)| s).collect();
    let label_stems: Vec<&String> = labels.iter().map(|(s, _)| s).collect();
    if image_stems != label_stems {
        let orphan = image_stems
            .iter()
            .find(|s| !label_stems.contains(s))
            .map(|s| format!("image {s}.png has no label file"))
            .or_else(|| {
                label_stems
                    .iter()
                    .find(|s| !image_stems.contains(s))
                    .map(|s| format!("label file {s}.txt has no image"))
            })
            .unwrap_or_default();
        return Err(CliError::Validation(format!("{}: {orphan}", dir.display())));
    }
    if images.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: no images found",
            dir.display()
        )));
    }
    images
        .into_iter()
        .zip(labels)
        .map(|((stem, img_path), (_, label_path))| {
            let png = read_bytes(&img_path)?;
            let image = decode_png(&png, &img_path)?;
            let (h, w) = (image.shape()[0] as f64, image.shape()[1] as f64);
            let records = read_labels(&label_path, w, h, false)?;
            let boxes = records.iter().map(|r| r.bbox).collect();
            let classes = records.iter().map(|r| r.class_id).collect();
            let item = LabeledImage::new(image, boxes, classes)
                .map_err(|e| CliError::Validation(format!("{}: {e}", label_path.display())))?;
            Ok(Sample { stem, item, png })
        })
        .collect()
}

/// Encoded image and label text of a sample, ready to write.
pub fn encode_sample(item: &LabeledImage) -> Result<(Vec<u8>, String), CliError> {
    let png = encode_png(&item.image)?;
    let records: Vec<LabelRecord> = item
        .boxes
        .iter()
        .zip(&item.classes)
        .map(|(&bbox, &class_id)| LabelRecord {
            class_id,
            bbox,
            score: None,
        })
        .collect();
    let text = serialize_label_file(&records, item.width() as f64, item.height() as f64)?;
    Ok((png, text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_is_exact_on_8bit_values() {
        let t = Tensor::from_fn(&[3, 5, 3], |i| ((i * 37) % 256) as f64 / 255.0);
        let bytes = encode_png(&t).unwrap();
        assert_eq!(decode_png(&bytes, Path::new("x.png")).unwrap(), t);
        assert_eq!(bytes, encode_png(&t).unwrap());
        assert!(encode_png(&Tensor::zeros(&[2, 2, 1])).is_err());
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
