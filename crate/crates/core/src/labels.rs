//! YOLO-style label text: `class_id cx cy w h [score]` per line, coordinates
//! normalised to the image size.

use std::fmt::Write as _;

use crate::boxes::BBox;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelRecord {
    pub class_id: u32,
    pub bbox: BBox,
    pub score: Option<f64>,
}

fn check_dims(image_w: f64, image_h: f64) -> Result<()> {
    if !(image_w > 0.0 && image_h > 0.0 && image_w.is_finite() && image_h.is_finite()) {
        return Err(Error::invalid(format!(
            "image size {image_w}x{image_h} must be positive"
        )));
    }
    Ok(())
}

/// Parses a label file into absolute corner-form boxes. Blank lines are
/// skipped; with `expect_scores` every line must carry a sixth column.
pub fn parse_label_file(
    text: &str,
    image_w: f64,
    image_h: f64,
    expect_scores: bool,
) -> Result<Vec<LabelRecord>> {
    check_dims(image_w, image_h)?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: i + 1, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let want = if expect_scores { 6 } else { 5 };
        if fields.len() != want {
            return Err(err(format!(
                "expected {want} fields, found {}",
                fields.len()
            )));
        }
        let class_id: u32 = fields[0].parse().map_err(|_| {
            err(format!(
                "class id {:?} is not a non-negative integer",
                fields[0]
            ))
        })?;
        let mut nums = [0.0; 5];
        for (k, (slot, name)) in nums
            .iter_mut()
            .zip(["cx", "cy", "w", "h", "score"])
            .enumerate()
            .take(want - 1)
        {
            let v: f64 = fields[k + 1]
                .parse()
                .map_err(|_| err(format!("{name} {:?} is not a number", fields[k + 1])))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(err(format!("{name} {v} outside [0, 1]")));
            }
            *slot = v;
        }
        let [cx, cy, w, h, score] = nums;
        let x1 = ((cx - w / 2.0) * image_w).max(0.0);
        let y1 = ((cy - h / 2.0) * image_h).max(0.0);
        let x2 = ((cx + w / 2.0) * image_w).min(image_w);
        let y2 = ((cy + h / 2.0) * image_h).min(image_h);
        let bbox = BBox::new(x1, y1, x2.max(x1), y2.max(y1)).map_err(|e| err(e.to_string()))?;
        out.push(LabelRecord {
            class_id,
            bbox,
            score: expect_scores.then_some(score),
        });
    }
    Ok(out)
}

/// Inverse of [`parse_label_file`], six decimals per field.
pub fn serialize_label_file(records: &[LabelRecord], image_w: f64, image_h: f64) -> Result<String> {
    check_dims(image_w, image_h)?;
    let mut s = String::new();
    for r in records {
        if !r.bbox.is_within(image_w, image_h) {
            return Err(Error::invalid(format!(
                "box {:?} lies outside the {image_w}x{image_h} image",
                r.bbox
            )));
        }
        let (cx, cy) = r.bbox.center();
        let _ = write!(
            s,
            "{} {:.6} {:.6} {:.6} {:.6}",
            r.class_id,
            cx / image_w,
            cy / image_h,
            r.bbox.width() / image_w,
            r.bbox.height() / image_h
        );
        if let Some(score) = r.score {
            if !(0.0..=1.0).contains(&score) {
                return Err(Error::invalid(format!("score {score} outside [0, 1]")));
            }
            let _ = write!(s, " {score:.6}");
        }
        s.push('\n');
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_example() {
        let r = parse_label_file("0 0.5 0.5 0.25 0.25\n", 640.0, 640.0, false).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].class_id, 0);
        assert_eq!(r[0].bbox, BBox::new(240.0, 240.0, 400.0, 400.0).unwrap());
        assert_eq!(
            serialize_label_file(&r, 640.0, 640.0).unwrap(),
            "0 0.500000 0.500000 0.250000 0.250000\n"
        );
    }

    #[test]
    fn empty_and_degenerate() {
        assert!(parse_label_file("", 10.0, 10.0, false).unwrap().is_empty());
        assert_eq!(serialize_label_file(&[], 10.0, 10.0).unwrap(), "");
        let flat = LabelRecord {
            class_id: 4,
            bbox: BBox::new(2.0, 3.0, 2.0, 7.0).unwrap(),
            score: None,
        };
        assert_eq!(
            serialize_label_file(&[flat], 10.0, 10.0).unwrap(),
            "4 0.200000 0.500000 0.000000 0.400000\n"
        );
    }

    #[test]
    fn rejects_bad_lines_with_line_numbers() {
        let e = parse_label_file("0 0.5 0.5 0.1 0.1\n0 1.5 0.5 0.2 0.2\n", 10.0, 10.0, false)
            .unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        assert!(parse_label_file("0 0.5 0.5 0.1 0.1\n", 10.0, 10.0, true).is_err());
        assert!(parse_label_file("-1 0.5 0.5 0.1 0.1\n", 10.0, 10.0, false).is_err());
        assert!(parse_label_file("0 0.5 0.5 0.1 0.1 1.2\n", 10.0, 10.0, true).is_err());
        assert!(parse_label_file("0 a 0.5 0.1 0.1\n", 10.0, 10.0, false).is_err());
        assert!(parse_label_file("", 0.0, 10.0, false).is_err());
    }

    #[test]
    fn scores_round_trip() {
        let r = parse_label_file("3 0.25 0.75 0.5 0.5 0.875\n", 100.0, 200.0, true).unwrap();
        assert_eq!(r[0].score, Some(0.875));
        let text = serialize_label_file(&r, 100.0, 200.0).unwrap();
        assert_eq!(text, "3 0.250000 0.750000 0.500000 0.500000 0.875000\n");
    }

    #[test]
    fn out_of_bounds_box_is_an_error() {
        let r = LabelRecord {
            class_id: 0,
            bbox: BBox::new(0.0, 0.0, 11.0, 5.0).unwrap(),
            score: None,
        };
        assert!(serialize_label_file(&[r], 10.0, 10.0).is_err());
    }
}
