use std::collections::BTreeMap;

use tsr_core::eval::{evaluate, Detection, EvalReport, GroundTruth};

use crate::io::{image_size, label_files, read_labels, write_bytes};
use crate::{CliError, EvalArgs, RunConfig};

/// Loads both directories. Boxes are measured in pixels when the ground
/// truth directory carries images and in normalised units otherwise.
pub fn load(args: &EvalArgs) -> Result<(Vec<Detection>, Vec<GroundTruth>), CliError> {
    let mut sizes = BTreeMap::new();
    let mut gts = Vec::new();
    for (stem, path) in label_files(&args.gt)? {
        let (w, h) = image_size(&args.gt, &stem)?.unwrap_or((1.0, 1.0));
        gts.extend(
            read_labels(&path, w, h, false)?
                .into_iter()
                .map(|r| GroundTruth {
                    bbox: r.bbox,
                    class_id: r.class_id,
                    image_id: stem.clone(),
                }),
        );
        sizes.insert(stem, (w, h));
    }
    let mut dets = Vec::new();
    for (stem, path) in label_files(&args.pred)? {
        let Some(&(w, h)) = sizes.get(&stem) else {
            return Err(CliError::Validation(format!(
                "{}: no ground-truth label file for this prediction",
                path.display()
            )));
        };
        dets.extend(
            read_labels(&path, w, h, true)?
                .into_iter()
                .map(|r| Detection {
                    bbox: r.bbox,
                    class_id: r.class_id,
                    score: r.score.expect("scores were required"),
                    image_id: stem.clone(),
                }),
        );
    }
    Ok((dets, gts))
}

pub fn report(args: &EvalArgs, cfg: &RunConfig) -> Result<EvalReport, CliError> {
    let (dets, gts) = load(args)?;
    Ok(evaluate(
        &dets,
        &gts,
        args.iou.unwrap_or(cfg.iou_thresh),
        args.conf.unwrap_or(cfg.conf_thresh),
    )?)
}

pub fn run(args: &EvalArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let r = report(args, cfg)?;
    let mut json = serde_json::to_string_pretty(&r).expect("report serialises");
    json.push('\n');
    match &args.out {
        Some(path) => {
            write_bytes(path, json.as_bytes())?;
            println!(
                "mAP@{:.2} {:.4}  precision {:.4}  recall {:.4}  tp {} fp {} fn {} -> {}",
                r.iou_thresh,
                r.map50,
                r.precision,
                r.recall,
                r.tp,
                r.fp,
                r.fn_,
                path.display()
            );
        }
        None => print!("{json}"),
    }
    Ok(())
}
