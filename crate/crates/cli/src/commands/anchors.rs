use tsr_core::anchors::{kmeans_anchors, DEFAULT_MAX_ITER};

use crate::io::{image_size, label_files, read_labels, write_bytes};
use crate::{AnchorsArgs, CliError, RunConfig};

/// Box `(w, h)` in pixels over every label file of `args.labels`.
pub fn collect_shapes(args: &AnchorsArgs, cfg: &RunConfig) -> Result<Vec<(f64, f64)>, CliError> {
    let side = args.img_size.unwrap_or(cfg.augment.target_size) as f64;
    let mut shapes = Vec::new();
    for (stem, path) in label_files(&args.labels)? {
        let (w, h) = image_size(&args.labels, &stem)?.unwrap_or((side, side));
        shapes.extend(
            read_labels(&path, w, h, false)?
                .iter()
                .map(|r| (r.bbox.width(), r.bbox.height()))
                .filter(|&(bw, bh)| bw > 0.0 && bh > 0.0),
        );
    }
    Ok(shapes)
}

pub fn run(args: &AnchorsArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let shapes = collect_shapes(args, cfg)?;
    let k = args.k.unwrap_or(cfg.anchor_k);
    let set = kmeans_anchors(&shapes, k, cfg.seed(), DEFAULT_MAX_ITER)?;
    write_bytes(&args.out, set.to_text(cfg.seed()).as_bytes())?;
    println!(
        "{} anchors from {} boxes, mean best IoU {:.4} -> {}",
        set.anchors.len(),
        shapes.len(),
        set.mean_best_iou,
        args.out.display()
    );
    Ok(())
}
