use rand::Rng;
use serde::Serialize;
use tsr_core::blocks::{
    bifpn_fuse, coordinate_attention, lska, odconv, BifpnNodeParams, CaParams, LskaParams,
    OdconvParams, LSKA_DILATION, LSKA_KERNEL,
};
use tsr_core::eval::fps_bench;
use tsr_core::rng::item_rng;
use tsr_core::tensor::Tensor;

use crate::io::write_bytes;
use crate::{BenchArgs, CliError, RunConfig};

/// Detection-layer resolutions, finest last.
pub const LAYER_SIZES: [usize; 4] = [20, 40, 80, 160];
pub const BLOCKS: [&str; 4] = ["coordinate_attention", "bifpn_fuse", "odconv", "lska"];

const ODCONV_KERNELS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub block: String,
    pub size: usize,
    pub channels: usize,
    pub fps: f64,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

fn random(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Times `block` on a `1 x channels x size x size` input. BiFPN fuses that
/// input with a half-resolution neighbour.
pub fn bench_block(
    block: &str,
    size: usize,
    channels: usize,
    warmup: usize,
    iters: usize,
    seed: u64,
) -> Result<BenchRow, CliError> {
    let mut rng = item_rng(seed, size as u64);
    let x = random(&[1, channels, size, size], &mut rng);
    let mut failure = None;
    let mut guard = |r: tsr_core::Result<Tensor>| {
        if let Err(e) = r {
            failure.get_or_insert(e);
        }
    };
    let res = match block {
        "coordinate_attention" => {
            let ratio = (1..=4)
                .rev()
                .find(|r| channels.is_multiple_of(*r))
                .unwrap_or(1);
            let p = CaParams::random(channels, ratio, &mut rng)?;
            fps_bench(|| guard(coordinate_attention(&x, &p)), warmup, iters)?
        }
        "bifpn_fuse" => {
            let coarse = random(&[1, channels, size.div_ceil(2), size.div_ceil(2)], &mut rng);
            let inputs = [x.clone(), coarse];
            let p = BifpnNodeParams::uniform(2, channels);
            fps_bench(|| guard(bifpn_fuse(&inputs, &p)), warmup, iters)?
        }
        "odconv" => {
            let p = OdconvParams::random(channels, channels, ODCONV_KERNELS, 3, &mut rng)?;
            fps_bench(|| guard(odconv(&x, &p)), warmup, iters)?
        }
        "lska" => {
            let p = LskaParams::random(channels, LSKA_KERNEL, LSKA_DILATION, &mut rng)?;
            fps_bench(|| guard(lska(&x, &p)), warmup, iters)?
        }
        other => return Err(CliError::Validation(format!("unknown block {other:?}"))),
    };
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(BenchRow {
        block: block.to_owned(),
        size,
        channels,
        fps: res.fps,
        mean_ms: res.mean_ms,
        min_ms: res.min_ms,
        max_ms: res.max_ms,
    })
}

pub fn run(args: &BenchArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let iters = args.iters.unwrap_or(cfg.bench_iters);
    let warmup = args.warmup.unwrap_or(cfg.bench_warmup);
    let channels = args.channels.unwrap_or(cfg.bench_channels);
    let mut rows = Vec::new();
    println!(
        "{:<22} {:>5} {:>9} {:>10} {:>10}",
        "block", "size", "channels", "fps", "mean_ms"
    );
    for block in BLOCKS {
        for size in LAYER_SIZES {
            let row = bench_block(block, size, channels, warmup, iters, cfg.seed())?;
            println!(
                "{:<22} {:>5} {:>9} {:>10.2} {:>10.3}",
                row.block, row.size, row.channels, row.fps, row.mean_ms
            );
            rows.push(row);
        }
    }
    if let Some(path) = &args.out {
        let mut json = serde_json::to_string_pretty(&rows).expect("rows serialise");
        json.push('\n');
        write_bytes(path, json.as_bytes())?;
    }
    Ok(())
}
