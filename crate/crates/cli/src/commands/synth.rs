use rand::Rng;
use tsr_core::augment::LabeledImage;
use tsr_core::boxes::BBox;
use tsr_core::labels::{serialize_label_file, LabelRecord};
use tsr_core::rng::item_rng;
use tsr_core::synth::{synth_scene, CLASS_COLORS};

use crate::io::{encode_sample, write_bytes};
use crate::{CliError, RunConfig, SynthArgs};

const PRED_STREAM_KEY: u64 = 0x5052_4544;

/// Imperfect detections for a scene: most objects found with a jittered box,
/// some missed, plus an occasional low-confidence false positive.
pub fn noisy_predictions(
    item: &LabeledImage,
    seed: u64,
    index: u64,
) -> Result<Vec<LabelRecord>, CliError> {
    let mut rng = item_rng(seed ^ PRED_STREAM_KEY, index);
    let (w, h) = (item.width() as f64, item.height() as f64);
    let mut out = Vec::new();
    for (b, &class_id) in item.boxes.iter().zip(&item.classes) {
        if rng.random_bool(0.1) {
            continue;
        }
        let j = |rng: &mut _, s: f64| Rng::random_range(rng, -0.08..0.08) * s;
        let (dx, dy) = (j(&mut rng, b.width()), j(&mut rng, b.height()));
        let bbox = BBox::new(b.x1 + dx, b.y1 + dy, b.x2 + dx, b.y2 + dy)?.clip(w, h);
        out.push(LabelRecord {
            class_id,
            bbox,
            score: Some(rng.random_range(0.5..1.0)),
        });
    }
    if rng.random_bool(0.3) {
        let (bw, bh) = (
            rng.random_range(4.0..w / 3.0),
            rng.random_range(4.0..h / 3.0),
        );
        let (x, y) = (rng.random_range(0.0..w - bw), rng.random_range(0.0..h - bh));
        out.push(LabelRecord {
            class_id: rng.random_range(0..CLASS_COLORS.len() as u32),
            bbox: BBox::new(x, y, x + bw, y + bh)?,
            score: Some(rng.random_range(0.05..0.6)),
        });
    }
    Ok(out)
}

pub fn run(args: &SynthArgs, cfg: &RunConfig) -> Result<(), CliError> {
    if args.width < 16 || args.height < 16 {
        return Err(CliError::Validation(
            "synthetic images need at least 16 x 16 pixels".into(),
        ));
    }
    for i in 0..args.count {
        let item = synth_scene(args.width, args.height, cfg.seed(), i as u64)?;
        let (png, labels) = encode_sample(&item)?;
        let stem = format!("synth_{i:04}");
        write_bytes(&args.out.join("images").join(format!("{stem}.png")), &png)?;
        write_bytes(
            &args.out.join("labels").join(format!("{stem}.txt")),
            labels.as_bytes(),
        )?;
        if let Some(dir) = &args.preds {
            let preds = noisy_predictions(&item, cfg.seed(), i as u64)?;
            let text = serialize_label_file(&preds, item.width() as f64, item.height() as f64)?;
            write_bytes(&dir.join(format!("{stem}.txt")), text.as_bytes())?;
        }
    }
    println!(
        "wrote {} synthetic images to {}",
        args.count,
        args.out.display()
    );
    Ok(())
}
